fn main() {
    use lmorse_core::field::*;
    use lmorse_core::flow::*;
    let f = TorusField::new(vec![FieldTerm { k: [0, 1], a: 1.0, b: 0.0 }]);
    let mu = TorusField::new(vec![
        FieldTerm { k: [1, 0], a: 1.0, b: 0.0 },
        FieldTerm { k: [0, 1], a: 0.5, b: 0.0 },
    ]);
    let p = Problem::new(f, mu, Tolerances::default(), 4.0);
    let start = ExtendedPoint::new([2.0 * std::f64::consts::FRAC_PI_3, 0.0], 0.0);
    let tg = RestTarget { id: 7, point: start.to_vec3(), basin_radius: 0.05 };
    let traj = integrate(&p, 1.0, start, Budget::new(50.0, 100_000), &[tg]);
    println!("terminal {:?} energy {:.3e} steps {} time {:.3} end {:?} dist {:.3e}",
        traj.terminal, traj.energy_spent, traj.steps, traj.time, traj.end_lifted, traj.end().dist(&start));
    println!("rhs at start: {:?}", p.flow_rhs(start.to_vec3(), 1.0));
}
