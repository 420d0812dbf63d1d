use lmorse_core::orbits::{polish_connection, ShootParams};
use lmorse_core::pipeline;

fn main() {
    let lambda: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let ws = pipeline::prepare_default().unwrap();
    let params = ShootParams::default();
    for p_id in [0usize, 3] {
        let p = &ws.crit[p_id];
        let seeds = pipeline::seeds_from_restricted(&ws, p);
        println!("p={} seeds: {}", p_id, seeds.len());
        for seed in &seeds {
            println!(
                "  seed q={} path_len={} t_end={:.2} start={:?} end={:?}",
                seed.q,
                seed.path.len(),
                seed.path.last().unwrap().0,
                seed.path.first().unwrap().1,
                seed.path.last().unwrap().1
            );
            let t = std::time::Instant::now();
            match polish_connection(&ws.problem, &ws.crit, lambda, p, &ws.crit[seed.q], &seed.path, &params) {
                Some(orb) => println!(
                    "   POLISHED in {:?}: theta={:.8} nodes={} resid_energy={:.2e}",
                    t.elapsed(),
                    orb.theta,
                    orb.nodes.len(),
                    orb.witness.energy_residual(ws.crit[seed.q].f_value)
                ),
                None => println!("   FAILED in {:?}", t.elapsed()),
            }
        }
    }
}
