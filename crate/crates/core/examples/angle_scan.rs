use lmorse_core::flow::{Budget, FlowRun, RestTarget};
use lmorse_core::orbits::unstable_frame;
use lmorse_core::pipeline;

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let lambda: f64 = a.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let p_id: usize = a.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let th_lo: f64 = a.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let th_hi: f64 = a.get(4).and_then(|s| s.parse().ok()).unwrap_or(std::f64::consts::TAU);
    let n: usize = a.get(5).and_then(|s| s.parse().ok()).unwrap_or(96);
    let ws = pipeline::prepare_default().unwrap();
    let p = &ws.crit[p_id];
    let frame = unstable_frame(&ws.problem, p, lambda);
    let (v1, v2) = (frame[0].1, frame[1].1);
    let r0 = 1e-4;
    let targets: Vec<RestTarget> = ws
        .crit
        .iter()
        .map(|c| RestTarget {
            id: c.id,
            point: c.point.to_vec3(),
            basin_radius: 0.08,
        })
        .collect();
    println!("frame eigs: {:?} {:?}", frame[0].0, frame[1].0);
    for k in 0..=n {
        let th = th_lo + (th_hi - th_lo) * k as f64 / n as f64;
        let z0 = [
            p.point.x[0] + r0 * (th.cos() * v1[0] + th.sin() * v2[0]),
            p.point.x[1] + r0 * (th.cos() * v1[1] + th.sin() * v2[1]),
            p.point.eta + r0 * (th.cos() * v1[2] + th.sin() * v2[2]),
        ];
        let mut run = FlowRun::new(&ws.problem, lambda);
        run.side_dirs = ws
            .crit
            .iter()
            .map(|_| Some([0.0, 0.0, 1.0]))
            .collect();
        let (traj, appr) = run.integrate(z0, Budget::for_lambda(lambda), &targets);
        let fmt = |i: usize| -> String {
            if appr[i].dist < 1.5 {
                format!("q{i}:d={:.2e},s={:+.0e}", appr[i].dist, appr[i].side)
            } else {
                String::new()
            }
        };
        let mut near = String::new();
        for i in 0..ws.crit.len() {
            if ws.crit[i].index_f + 1 == p.index_f {
                let s = fmt(i);
                if !s.is_empty() {
                    near.push_str(&s);
                    near.push(' ');
                }
            }
        }
        println!("th={th:.8} term={:?} {near}", traj.terminal);
    }
}
