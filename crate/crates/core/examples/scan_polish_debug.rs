use lmorse_core::orbits::{count_boundary_from, ShootParams};
use lmorse_core::pipeline;

fn main() {
    let lambda: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let p_id: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let ws = pipeline::prepare_default().unwrap();
    let params = ShootParams::default();
    let t = std::time::Instant::now();
    let out = count_boundary_from(&ws.problem, &ws.crit, lambda, p_id, &[], &params).unwrap();
    println!("count for p={p_id} at lambda={lambda} took {:?}", t.elapsed());
    for f in &out.flags {
        println!("flag: {f}");
    }
    for pc in &out.pairs {
        println!("n({},{}) = {} orbits parity {}", pc.p, pc.q, pc.orbits.len(), pc.parity);
        for o in &pc.orbits {
            println!(
                "  theta={:.10} energy_resid={:.2e} time={:.1}",
                o.theta,
                o.witness.energy_residual(ws.crit[o.q].f_value),
                o.witness.time
            );
        }
    }
}
