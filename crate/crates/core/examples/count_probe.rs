use lmorse_core::orbits::ShootParams;
use lmorse_core::pipeline;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lambdas: Vec<f64> = if args.len() > 1 {
        args[1].split(',').map(|s| s.parse().unwrap()).collect()
    } else {
        vec![0.5]
    };
    let t0 = std::time::Instant::now();
    let ws = pipeline::prepare_default().unwrap();
    let cat = pipeline::catalog(&ws, 200).unwrap();
    let (czero, seqs) = pipeline::build_complex_zero(&ws, &cat).unwrap();
    println!("setup: {:?}; C0 betti {:?}", t0.elapsed(), czero.betti());
    let params = ShootParams::default();
    for &lambda in &lambdas {
        let t1 = std::time::Instant::now();
        let seeds = pipeline::default_seeds(&ws, Some(&cat), Some(&seqs), lambda);
        let count = pipeline::count_at_lambda(&ws, lambda, &seeds, &params).unwrap();
        println!("--- lambda = {lambda} ({:?}) regular={}", t1.elapsed(), count.regular);
        for oc in &count.outcomes {
            for f in &oc.flags {
                println!("  flag[p={}]: {f}", oc.p);
            }
            for pc in &oc.pairs {
                if pc.parity != 0 || !pc.orbits.is_empty() {
                    println!(
                        "  n({},{}) = {} orbits, parity {}",
                        pc.p,
                        pc.q,
                        pc.orbits.len(),
                        pc.parity
                    );
                    for o in &pc.orbits {
                        println!(
                            "    theta={:.10} margin={:.2e} energy_resid={:.2e} time={:.1} nodes={}",
                            o.theta,
                            o.angle_margin,
                            o.witness.energy_residual(ws.crit[o.q].f_value),
                            o.witness.time,
                            o.nodes.len()
                        );
                    }
                }
            }
        }
        match pipeline::build_complex_lambda(&ws, &count) {
            Ok(c) => println!("  betti: {:?}", c.betti()),
            Err(e) => println!("  complex failed: {e}"),
        }
    }
    println!("total {:?}", t0.elapsed());
}
