//! Enumeration of fast-slow orbit sequences between critical points of
//! adjacent index: a depth-first walk over the finite site graph spanned by
//! branch markers, with the alternation, regularity, and index bookkeeping
//! rules enforced edge by edge. The value of F strictly decreases along
//! every edge, so the walk cannot revisit anything and terminates.

use serde::Serialize;

use crate::critical::{CritPointF, SlowType};
use crate::field::{ExtendedPoint, Problem};
use crate::flow::Trajectory;
use crate::linalg::Vec3;
use crate::slow::MarkerKind;

use super::catalog::Catalog;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CaseTag {
    I,
    II,
    III,
    IV,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FastKind {
    HandleSlide(usize),
    CuspInto(usize),
    CuspOut(usize),
    FoldJump(usize),
    InitialJump(usize),
    FinalJump(usize),
}

#[derive(Clone, Debug, Serialize)]
pub enum Segment {
    /// Slow drift along a branch between arclength positions.
    Slow { branch: usize, s_from: f64, s_to: f64 },
    /// One catalogued fast orbit.
    Fast { kind: FastKind },
}

/// A fast-slow orbit sequence from one critical point to another.
#[derive(Clone, Debug, Serialize)]
pub struct FastSlowOrbitSeq {
    pub from: usize,
    pub to: usize,
    pub rests: Vec<ExtendedPoint>,
    pub segments: Vec<Segment>,
    pub case_tag: CaseTag,
}

impl FastSlowOrbitSeq {
    /// Alternation + endpoint parity rules for the case tag.
    pub fn parity_ok(&self) -> bool {
        let n = self.segments.len();
        if n == 0 {
            return false;
        }
        let odd_fast = matches!(self.segments[0], Segment::Fast { .. });
        for (i, seg) in self.segments.iter().enumerate() {
            let want_fast = if odd_fast { i % 2 == 0 } else { i % 2 == 1 };
            let is_fast = matches!(seg, Segment::Fast { .. });
            if want_fast != is_fast {
                return false;
            }
        }
        match self.case_tag {
            CaseTag::I => odd_fast && n % 2 == 0,
            CaseTag::II => odd_fast && n % 2 == 1,
            CaseTag::III => !odd_fast && n % 2 == 1,
            CaseTag::IV => !odd_fast && n % 2 == 0,
        }
    }

    /// Sampled image of the whole sequence (lifted to T^2 x R samples) for
    /// Hausdorff comparisons against true orbits.
    pub fn image_points(&self, catalog: &Catalog) -> Vec<Vec3> {
        let mut pts = Vec::new();
        for seg in &self.segments {
            match seg {
                Segment::Slow { branch, s_from, s_to } => {
                    let br = &catalog.manifold.branches[*branch];
                    let (lo, hi) = (s_from.min(*s_to), s_from.max(*s_to));
                    for node in &br.nodes {
                        if node.s >= lo - 1e-9 && node.s <= hi + 1e-9 {
                            pts.push(node.lifted);
                        }
                    }
                }
                Segment::Fast { kind } => {
                    let traj = self.witness_for(catalog, *kind);
                    if let Some(t) = traj {
                        for (_, p) in &t.samples {
                            pts.push(p.to_vec3());
                        }
                    }
                }
            }
        }
        pts
    }

    fn witness_for<'a>(&self, catalog: &'a Catalog, kind: FastKind) -> Option<&'a Trajectory> {
        match kind {
            FastKind::HandleSlide(i) => catalog.handle_slides.get(i).map(|h| &h.witness),
            FastKind::CuspInto(i) | FastKind::CuspOut(i) => catalog.cusps.get(i).map(|c| &c.witness),
            FastKind::FoldJump(i) => catalog.fold_jumps.get(i).map(|j| &j.witness),
            FastKind::InitialJump(i) | FastKind::FinalJump(i) => {
                catalog.crit_jumps.get(i).map(|j| &j.witness)
            }
        }
    }

    pub fn eta_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in &self.rests {
            lo = lo.min(r.eta);
            hi = hi.max(r.eta);
        }
        (lo, hi)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EnumerateError {
    #[error("graph inconsistency: {0}")]
    GraphInconsistency(String),
}

/// A site: a marker position on a branch where sequences can rest.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Site {
    branch: usize,
    /// index into the branch's sorted marker list
    marker: usize,
    s: f64,
    kind: SiteKind,
    point: Vec3,
    /// fast index of the rest point itself (lower index for folds)
    index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum SiteKind {
    Crit(usize),
    Fold(usize),
    Rest,
}

struct Graph<'a> {
    problem: &'a Problem,
    catalog: &'a Catalog,
    /// per branch, sites consolidated from markers, sorted by s
    sites: Vec<Vec<Site>>,
    /// fast edges indexed by (branch, site) of their source
    fast_from: Vec<Vec<(usize, FastKind, Site)>>,
}

fn sites_of(catalog: &Catalog, problem: &Problem) -> Vec<Vec<Site>> {
    let mut out = Vec::new();
    for br in &catalog.manifold.branches {
        let mut sites: Vec<Site> = Vec::new();
        for m in &br.markers {
            let kind = match m.kind {
                MarkerKind::CritF(id) => SiteKind::Crit(id),
                MarkerKind::Fold(id) => SiteKind::Fold(id),
                MarkerKind::HandleSlideEnd(_) | MarkerKind::RestStop(_) => SiteKind::Rest,
            };
            // merge by position; crit/fold identity wins over plain rests
            if let Some(existing) = sites.iter_mut().find(|s| (s.s - m.s).abs() < 1e-6) {
                if existing.kind == SiteKind::Rest && kind != SiteKind::Rest {
                    existing.kind = kind;
                }
                continue;
            }
            let index = match kind {
                SiteKind::Fold(fid) => catalog.manifold.folds[fid].lower_index,
                SiteKind::Crit(cid) => catalog.crit[cid].fast_index,
                SiteKind::Rest => {
                    let (idx, _) = crate::critical::fast_index(problem, [m.lifted[0], m.lifted[1]], m.lifted[2]);
                    idx
                }
            };
            sites.push(Site { branch: br.id, marker: 0, s: m.s, kind, point: m.lifted, index });
        }
        sites.sort_by(|a, b| a.s.partial_cmp(&b.s).unwrap());
        for (i, s) in sites.iter_mut().enumerate() {
            s.marker = i;
        }
        out.push(sites);
    }
    out
}

impl<'a> Graph<'a> {
    fn build(problem: &'a Problem, catalog: &'a Catalog) -> Result<Self, EnumerateError> {
        let sites = sites_of(catalog, problem);
        let locate = |branch: usize, s: f64, x: [f64; 2]| -> Result<Site, EnumerateError> {
            sites[branch]
                .iter()
                .filter(|site| (site.s - s).abs() < 1e-4 || crate::field::torus_dist([site.point[0], site.point[1]], x) < 1e-5 && (site.s - s).abs() < 0.05)
                .min_by(|a, b| {
                    (a.s - s).abs().partial_cmp(&(b.s - s).abs()).unwrap()
                })
                .copied()
                .ok_or_else(|| {
                    EnumerateError::GraphInconsistency(format!(
                        "no site on branch {branch} near s = {s}"
                    ))
                })
        };
        let locate_fold = |fid: usize| -> Result<Site, EnumerateError> {
            let f = &catalog.manifold.folds[fid];
            sites[f.branch]
                .iter()
                .find(|s| s.kind == SiteKind::Fold(fid))
                .copied()
                .ok_or_else(|| EnumerateError::GraphInconsistency(format!("fold {fid} has no site")))
        };
        let locate_crit = |cid: usize| -> Result<Site, EnumerateError> {
            for row in &sites {
                if let Some(s) = row.iter().find(|s| s.kind == SiteKind::Crit(cid)) {
                    return Ok(*s);
                }
            }
            Err(EnumerateError::GraphInconsistency(format!("critical point {cid} has no site")))
        };

        let mut fast_from: Vec<Vec<(usize, FastKind, Site)>> = Vec::new();
        fast_from.resize_with(sites.len(), Vec::new);
        let push = |from: Site, kind: FastKind, to: Site, fast_from: &mut Vec<Vec<(usize, FastKind, Site)>>| {
            fast_from[from.branch].push((from.marker, kind, to));
        };

        for (i, hs) in catalog.handle_slides.iter().enumerate() {
            let a = locate(hs.from.branch, hs.from.s, hs.from.x)?;
            let b = locate(hs.to.branch, hs.to.s, hs.to.x)?;
            push(a, FastKind::HandleSlide(i), b, &mut fast_from);
        }
        for (i, c) in catalog.cusps.iter().enumerate() {
            let partner = locate(c.partner.branch, c.partner.s, c.partner.x)?;
            let fold = locate_fold(c.fold)?;
            match c.direction {
                super::catalog::CuspDirection::IntoFold => {
                    push(partner, FastKind::CuspInto(i), fold, &mut fast_from)
                }
                super::catalog::CuspDirection::OutOfFold => {
                    push(fold, FastKind::CuspOut(i), partner, &mut fast_from)
                }
            }
        }
        for (i, j) in catalog.fold_jumps.iter().enumerate() {
            let fold = locate_fold(j.fold)?;
            let landing = locate(j.landing.branch, j.landing.s, j.landing.x)?;
            push(fold, FastKind::FoldJump(i), landing, &mut fast_from);
        }
        for (i, j) in catalog.crit_jumps.iter().enumerate() {
            let saddle = locate(j.saddle.branch, j.saddle.s, j.saddle.x)?;
            let cs = locate_crit(j.crit)?;
            if j.outgoing {
                push(cs, FastKind::InitialJump(i), saddle, &mut fast_from);
            } else {
                push(saddle, FastKind::FinalJump(i), cs, &mut fast_from);
            }
        }
        Ok(Self { problem, catalog, sites, fast_from })
    }

    fn fast_edges(&self, site: &Site) -> Vec<(FastKind, Site)> {
        self.fast_from[site.branch]
            .iter()
            .filter(|(m, _, _)| *m == site.marker)
            .map(|(_, k, to)| (*k, *to))
            .collect()
    }

    fn f_at(&self, z: Vec3) -> f64 {
        self.problem.f_eta([z[0], z[1]], z[2])
    }

    /// Slow-flow direction on the arc adjacent to a site: +1 means the flow
    /// moves toward increasing s on that side, -1 decreasing, 0 blocked.
    fn arc_flow_dir(&self, branch: usize, s_lo: f64, s_hi: f64) -> f64 {
        let br = &self.catalog.manifold.branches[branch];
        let mid = 0.5 * (s_lo + s_hi);
        let h = (0.02f64).min(0.25 * (s_hi - s_lo)).max(1e-4);
        let za = br.at(mid - h);
        let zb = br.at(mid + h);
        let deta_ds = (zb[2] - za[2]) / (2.0 * h);
        let zm = br.at(mid);
        let mu = self.problem.mu.eval([zm[0], zm[1]]);
        let v = -mu * deta_ds;
        if v.abs() < 1e-12 {
            0.0
        } else {
            v.signum()
        }
    }

    /// Walk slow arcs from `from` in every admissible direction; yields the
    /// admissible stop sites together with the arc fast index at arrival.
    fn slow_runs(&self, from: &Site, expect_index: usize) -> Vec<(Site, f64, f64)> {
        let mut stops = Vec::new();
        let row = &self.sites[from.branch];
        let br = &self.catalog.manifold.branches[from.branch];
        let closed = br.closed();
        let n = row.len();
        for step in [1i64, -1i64] {
            // the arc immediately on this side of the site
            let next_idx = |i: usize| -> Option<usize> {
                let j = i as i64 + step;
                if closed {
                    Some(((j % n as i64 + n as i64) % n as i64) as usize)
                } else if j < 0 || j >= n as i64 {
                    None
                } else {
                    Some(j as usize)
                }
            };
            let mut cur = from.marker;
            loop {
                let Some(nxt) = next_idx(cur) else { break };
                let (s_a, s_b) = arc_span(br, row, cur, nxt, step, closed);
                let dir = self.arc_flow_dir(from.branch, s_a.min(s_b), s_a.max(s_b));
                let moving_out = if step == 1 { dir > 0.0 } else { dir < 0.0 };
                if !moving_out {
                    break;
                }
                // index constraint on the arc
                let mid = br.at(0.5 * (s_a + s_b));
                let (arc_index, _) = crate::critical::fast_index(self.problem, [mid[0], mid[1]], mid[2]);
                if arc_index != expect_index {
                    break;
                }
                let stop = row[nxt];
                stops.push((stop, from.s, stop.s));
                match stop.kind {
                    SiteKind::Crit(_) | SiteKind::Fold(_) => break,
                    SiteKind::Rest => {}
                }
                cur = nxt;
                if stops.len() > 4 * n {
                    break; // closed-loop safety
                }
            }
        }
        stops
    }
}

fn arc_span(
    br: &crate::slow::SlowBranch,
    row: &[Site],
    cur: usize,
    nxt: usize,
    step: i64,
    closed: bool,
) -> (f64, f64) {
    let mut s_a = row[cur].s;
    let mut s_b = row[nxt].s;
    if closed && step == 1 && s_b < s_a {
        // wrapped arc: sample direction on the [s_a, L] side
        s_b = br.arc_length();
    }
    if closed && step == -1 && s_b > s_a {
        s_a = 0.0;
    }
    (s_a, s_b)
}

/// Enumerate all fast-slow orbit sequences from `p` to `q` (adjacent index).
pub fn enumerate_fast_slow(
    problem: &Problem,
    catalog: &Catalog,
    p: &CritPointF,
    q: &CritPointF,
) -> Result<Vec<FastSlowOrbitSeq>, EnumerateError> {
    if p.index_f != q.index_f + 1 {
        return Ok(Vec::new());
    }
    let graph = Graph::build(problem, catalog)?;
    let case_tag = match (p.slow_type, q.slow_type) {
        (SlowType::Attractor, SlowType::Attractor) => CaseTag::I,
        (SlowType::Attractor, SlowType::Repeller) => CaseTag::II,
        (SlowType::Repeller, SlowType::Attractor) => CaseTag::III,
        (SlowType::Repeller, SlowType::Repeller) => CaseTag::IV,
    };
    let p_site = graph
        .sites
        .iter()
        .flatten()
        .find(|s| s.kind == SiteKind::Crit(p.id))
        .copied()
        .ok_or_else(|| EnumerateError::GraphInconsistency(format!("no site for critical point {}", p.id)))?;

    let mut results: Vec<FastSlowOrbitSeq> = Vec::new();
    // stack frame: (site, current index, next must be fast?, segments, rests)
    let mut stack: Vec<(Site, usize, bool, Vec<Segment>, Vec<ExtendedPoint>)> = Vec::new();
    let start_rest = ExtendedPoint::new([p_site.point[0], p_site.point[1]], p_site.point[2]);
    match p.slow_type {
        SlowType::Attractor => {
            stack.push((p_site, p.fast_index, true, Vec::new(), vec![start_rest]));
        }
        SlowType::Repeller => {
            stack.push((p_site, p.fast_index, false, Vec::new(), vec![start_rest]));
        }
    }

    while let Some((site, index, want_fast, segments, rests)) = stack.pop() {
        if segments.len() > 64 {
            return Err(EnumerateError::GraphInconsistency("sequence depth exceeded".into()));
        }
        if want_fast {
            for (kind, to) in graph.fast_edges(&site) {
                // index bookkeeping per edge kind
                let ok = match kind {
                    FastKind::HandleSlide(_) => to.index == index,
                    FastKind::CuspInto(_) => to.index + 1 == index,
                    FastKind::CuspOut(_) | FastKind::FoldJump(_) => to.index == index,
                    FastKind::InitialJump(_) => {
                        site.kind == SiteKind::Crit(p.id) && segments.is_empty() && to.index + 1 == index
                    }
                    FastKind::FinalJump(i) => {
                        catalog.crit_jumps[i].crit == q.id && to.index + 1 == index
                    }
                };
                if !ok {
                    continue;
                }
                if graph.f_at(to.point) >= graph.f_at(site.point) - 1e-12 {
                    return Err(EnumerateError::GraphInconsistency(
                        "fast edge fails to decrease F".into(),
                    ));
                }
                let mut segs = segments.clone();
                segs.push(Segment::Fast { kind });
                let mut rs = rests.clone();
                rs.push(ExtendedPoint::new([to.point[0], to.point[1]], to.point[2]));
                if matches!(kind, FastKind::FinalJump(_)) {
                    let seq = FastSlowOrbitSeq {
                        from: p.id,
                        to: q.id,
                        rests: rs,
                        segments: segs,
                        case_tag,
                    };
                    results.push(seq);
                } else {
                    stack.push((to, to.index, false, segs, rs));
                }
            }
        } else {
            // slow run; leaving a fold climbs to the upper-index branch
            let expect = match site.kind {
                SiteKind::Fold(fid) => catalog.manifold.folds[fid].lower_index + 1,
                _ => index,
            };
            for (stop, s_from, s_to) in graph.slow_runs(&site, expect) {
                let mut segs = segments.clone();
                segs.push(Segment::Slow { branch: site.branch, s_from, s_to });
                let mut rs = rests.clone();
                rs.push(ExtendedPoint::new([stop.point[0], stop.point[1]], stop.point[2]));
                match stop.kind {
                    SiteKind::Crit(cid) => {
                        if cid == q.id
                            && q.slow_type == SlowType::Attractor
                            && expect == q.fast_index
                        {
                            results.push(FastSlowOrbitSeq {
                                from: p.id,
                                to: q.id,
                                rests: rs,
                                segments: segs,
                                case_tag,
                            });
                        }
                        // interior critical points are not allowed; stop here
                    }
                    SiteKind::Fold(fid) => {
                        // regular arrival comes along the lower-index branch
                        if catalog.manifold.folds[fid].lower_index == expect {
                            stack.push((stop, expect, true, segs, rs));
                        }
                    }
                    SiteKind::Rest => {
                        stack.push((stop, expect, true, segs, rs));
                    }
                }
            }
        }
    }

    // dedupe identical segment chains (can arise from duplicated catalog rows)
    let mut unique: Vec<FastSlowOrbitSeq> = Vec::new();
    for seq in results {
        let sig = seq_signature(&seq);
        if !unique.iter().any(|u| seq_signature(u) == sig) {
            unique.push(seq);
        }
    }
    for seq in &unique {
        debug_assert!(seq.parity_ok(), "case parity violated: {seq:?}");
    }
    Ok(unique)
}

fn seq_signature(seq: &FastSlowOrbitSeq) -> String {
    let mut s = String::new();
    for seg in &seq.segments {
        match seg {
            Segment::Slow { branch, s_from, s_to } => {
                s.push_str(&format!("S{branch}:{s_from:.5}:{s_to:.5};"));
            }
            Segment::Fast { kind } => s.push_str(&format!("F{kind:?};")),
        }
    }
    s
}

/// Mod-2 counts of fast-slow sequences for every adjacent-index pair.
pub fn zero_boundary_counts(
    problem: &Problem,
    catalog: &Catalog,
) -> Result<Vec<(usize, usize, usize, Vec<FastSlowOrbitSeq>)>, EnumerateError> {
    let mut out = Vec::new();
    for p in &catalog.crit {
        for q in &catalog.crit {
            if p.index_f != q.index_f + 1 {
                continue;
            }
            let seqs = enumerate_fast_slow(problem, catalog, p, q)?;
            out.push((p.id, q.id, seqs.len() % 2, seqs));
        }
    }
    Ok(out)
}
