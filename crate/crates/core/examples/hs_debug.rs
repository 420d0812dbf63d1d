use lmorse_core::orbits::{rests_at_eta, separatrix_run, SepLanding};

fn main() {
    let ws = lmorse_core::pipeline::prepare_default().unwrap();
    let p = &ws.problem;
    let n = 160;
    let lo = -2.2;
    let hi = 0.8;
    let mut prev: Vec<(f64, f64, f64, Option<[f64; 2]>, f64)> = Vec::new();
    for i in 0..n {
        let eta = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let rests = rests_at_eta(p, &ws.manifold, eta);
        let saddles: Vec<_> = rests.iter().filter(|r| r.fast_index == 1).copied().collect();
        let mut rows = Vec::new();
        for s in &saddles {
            for dir in [1.0, -1.0] {
                let run = separatrix_run(p, s, dir, false, &rests, &ws.manifold.folds, None);
                let landing = match run.landing {
                    SepLanding::Rest(k) => Some(rests[k].x),
                    _ => None,
                };
                let len: f64 = run
                    .traj
                    .samples
                    .windows(2)
                    .map(|w| lmorse_core::field::torus_dist(w[0].1.x, w[1].1.x))
                    .sum();
                rows.push((s.x[0], s.x[1], dir, landing, len));
            }
        }
        for r in &rows {
            if let Some(pr) = prev.iter().find(|q| {
                lmorse_core::field::torus_dist([q.0, q.1], [r.0, r.1]) < 0.3 && q.2 == r.2
            }) {
                let landing_changed = match (pr.3, r.3) {
                    (Some(a), Some(b)) => lmorse_core::field::torus_dist(a, b) > 0.3,
                    (None, None) => false,
                    _ => true,
                };
                let dlen = (pr.4 - r.4).abs();
                if landing_changed || dlen > 0.8 {
                    println!(
                        "eta={eta:+.4} src=({:.3},{:.3}) dir={} landing {:?} -> {:?} len {:.2} -> {:.2}",
                        r.0, r.1, r.2, pr.3, r.3, pr.4, r.4
                    );
                }
            }
        }
        prev = rows;
    }
}
