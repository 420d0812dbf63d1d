fn main() {
    let t0 = std::time::Instant::now();
    let ws = lmorse_core::pipeline::prepare_default().unwrap();
    println!("prepare: {:?}", t0.elapsed());
    for c in &ws.crit {
        println!(
            "crit {} x=({:.6},{:.6}) eta={:+.6} F={:+.6} idxF={} fast={} {:?}",
            c.id, c.point.x[0], c.point.x[1], c.point.eta, c.f_value, c.index_f, c.fast_index, c.slow_type
        );
    }
    for f in &ws.manifold.folds {
        println!(
            "fold {} x=({:.6},{:.6}) eta={:+.6} k={} c={:+.4} d={:+.4} side={}",
            f.id, f.point.x[0], f.point.x[1], f.point.eta, f.lower_index, f.c, f.d, f.eta_side
        );
    }
    println!("branches: {}", ws.manifold.branches.len());
    for b in &ws.manifold.branches {
        println!(
            "  branch {} len={:.2} nodes={} ends=({:?},{:?}) markers={} segs={:?}",
            b.id,
            b.arc_length(),
            b.nodes.len(),
            b.end_lo,
            b.end_hi,
            b.markers.len(),
            b.segments.iter().map(|s| s.fast_index).collect::<Vec<_>>()
        );
    }
    let t1 = std::time::Instant::now();
    let cat = lmorse_core::pipeline::catalog(&ws, 200).unwrap();
    println!("catalog: {:?}", t1.elapsed());
    for h in &cat.handle_slides {
        println!(
            "handle-slide {} eta={:+.8} from=({:.4},{:.4}) to=({:.4},{:.4}) margin={:.3e}",
            h.id, h.eta, h.from.x[0], h.from.x[1], h.to.x[0], h.to.x[1], h.margin
        );
    }
    for c in &cat.cusps {
        println!(
            "cusp {} fold={} dir={:?} partner=({:.4},{:.4}) decay={:.3}",
            c.id, c.fold, c.direction, c.partner.x[0], c.partner.x[1], c.decay_exponent
        );
    }
    for j in &cat.fold_jumps {
        println!(
            "fold-jump fold={} landing=({:.4},{:.4}) idx={}",
            j.fold, j.landing.x[0], j.landing.x[1], j.landing.fast_index
        );
    }
    for j in &cat.crit_jumps {
        println!(
            "crit-jump crit={} outgoing={} saddle=({:.4},{:.4})",
            j.crit, j.outgoing, j.saddle.x[0], j.saddle.x[1]
        );
    }
    println!("min special eta gap: {:.4e}", cat.min_special_eta_gap());
    let t2 = std::time::Instant::now();
    match lmorse_core::pipeline::build_complex_zero(&ws, &cat) {
        Ok((complex, counts)) => {
            println!("enumerate: {:?}", t2.elapsed());
            for (p, q, parity, seqs) in &counts {
                if !seqs.is_empty() || *parity != 0 {
                    println!("  N0({p},{q}) = {} sequences, parity {parity}", seqs.len());
                    for s in seqs {
                        println!(
                            "    case {:?} segs={}",
                            s.case_tag,
                            s.segments
                                .iter()
                                .map(|g| match g {
                                    lmorse_core::orbits::Segment::Slow { branch, s_from, s_to } =>
                                        format!("slow(b{branch} {:.2}->{:.2})", s_from, s_to),
                                    lmorse_core::orbits::Segment::Fast { kind } => format!("{kind:?}"),
                                })
                                .collect::<Vec<_>>()
                                .join(" | ")
                        );
                    }
                }
            }
            println!("betti of C0: {:?}", complex.betti());
        }
        Err(e) => println!("enumerate FAILED: {e}"),
    }
    println!("total: {:?}", t0.elapsed());
}
