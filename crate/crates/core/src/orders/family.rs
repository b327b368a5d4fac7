//! Finite generator families for each function class, plus a
//! finite-difference membership test used to validate them.

use super::function::{BlockFactor, Orientation, TestFunction};
use super::FunctionClass;
use crate::error::{invalid, Error, Result};
use crate::sample::SampleMatrix;

/// Families larger than this are refused with a resource-limit error.
pub const MAX_FAMILY_SIZE: usize = 20_000;

/// Sample hints are thinned to at most this many rows before computing
/// quantiles.
const HINT_ROWS: usize = 20_000;

/// Where anchors come from.
#[derive(Debug, Clone)]
pub enum AnchorSource {
    /// `anchors_per_axis` equally spaced points in `[-3, 3]` (`{0}` for one).
    Grid,
    /// Empirical quantiles at levels equally spaced in `[0.05, 0.95]`.
    Sample(SampleMatrix),
    /// Fixed anchor values used on every axis (e.g. the states of a chain).
    Explicit(Vec<f64>),
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

/// Type-7 empirical quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn thin(m: &SampleMatrix) -> SampleMatrix {
    if m.rows() <= HINT_ROWS {
        return m.clone();
    }
    let stride = m.rows().div_ceil(HINT_ROWS);
    let mut data = Vec::with_capacity(HINT_ROWS * m.dim());
    for i in (0..m.rows()).step_by(stride) {
        data.extend_from_slice(m.row(i));
    }
    SampleMatrix::new(m.dim(), data).expect("thinned rows keep the dimension")
}

impl AnchorSource {
    fn prepared(self) -> Self {
        match self {
            AnchorSource::Sample(m) => AnchorSource::Sample(thin(&m)),
            other => other,
        }
    }

    /// Anchors for the projection `theta . x`.
    fn anchors(&self, theta: &[f64], k: usize) -> Vec<f64> {
        let mut out = match self {
            AnchorSource::Grid => linspace(-3.0, 3.0, k),
            AnchorSource::Sample(m) => {
                let mut proj: Vec<f64> = m
                    .iter_rows()
                    .map(|r| r.iter().zip(theta).map(|(x, t)| x * t).sum())
                    .collect();
                proj.sort_by(f64::total_cmp);
                linspace(0.05, 0.95, k).into_iter().map(|p| quantile_sorted(&proj, p)).collect()
            }
            AnchorSource::Explicit(values) => {
                let s: f64 = theta.iter().sum();
                values.iter().map(|v| v * s).collect()
            }
        };
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn axis_anchors(&self, dim: usize, axis: usize, k: usize) -> Vec<f64> {
        let mut e = vec![0.0; dim];
        e[axis] = 1.0;
        self.anchors(&e, k)
    }

    fn for_block(&self, block: usize, block_dim: usize) -> AnchorSource {
        match self {
            AnchorSource::Sample(m) => {
                let mut data = Vec::with_capacity(m.rows() * block_dim);
                for r in m.iter_rows() {
                    data.extend_from_slice(&r[block * block_dim..(block + 1) * block_dim]);
                }
                AnchorSource::Sample(SampleMatrix::new(block_dim, data).expect("block slice"))
            }
            other => other.clone(),
        }
    }
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Deterministic unit directions. Up to three dimensions this is
/// `{-1,0,1}^d \ {0}` (or `{0,1}^d \ {0}` when `nonneg`), normalized; beyond
/// that a reduced set of axes, pairwise sums/differences and the diagonal.
pub fn direction_grid(dim: usize, nonneg: bool) -> Vec<Vec<f64>> {
    let mut raw: Vec<Vec<f64>> = Vec::new();
    if dim <= 3 {
        let levels: &[f64] = if nonneg { &[0.0, 1.0] } else { &[-1.0, 0.0, 1.0] };
        let total = levels.len().pow(dim as u32);
        for code in 0..total {
            let mut c = code;
            let v: Vec<f64> = (0..dim)
                .map(|_| {
                    let l = levels[c % levels.len()];
                    c /= levels.len();
                    l
                })
                .collect();
            if v.iter().any(|x| *x != 0.0) {
                raw.push(v);
            }
        }
    } else {
        let unit = |i: usize| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            e
        };
        for i in 0..dim {
            raw.push(unit(i));
        }
        for i in 0..dim {
            for j in i + 1..dim {
                let mut v = unit(i);
                v[j] = 1.0;
                raw.push(v);
                if !nonneg {
                    let mut w = unit(i);
                    w[j] = -1.0;
                    raw.push(w);
                }
            }
        }
        raw.push(vec![1.0; dim]);
        if !nonneg {
            let base = raw.clone();
            raw.extend(base.into_iter().map(|v| v.into_iter().map(|x| -x).collect()));
        }
    }
    raw.into_iter().map(normalize).collect()
}

/// Directions whose first nonzero coordinate is positive (one of each `±theta`).
fn half_directions(dim: usize) -> Vec<Vec<f64>> {
    direction_grid(dim, false)
        .into_iter()
        .filter(|v| v.iter().find(|x| **x != 0.0).is_some_and(|x| *x > 0.0))
        .collect()
}

fn unit(dim: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[i] = 1.0;
    e
}

/// All combinations choosing one entry from each axis list.
fn grid_product(axes: &[Vec<Option<f64>>]) -> Vec<Vec<Option<f64>>> {
    let mut out: Vec<Vec<Option<f64>>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for a in axis {
                let mut p = prefix.clone();
                p.push(*a);
                next.push(p);
            }
        }
        out = next;
        if out.len() > MAX_FAMILY_SIZE * 4 {
            break;
        }
    }
    out
}

fn orthants(dim: usize, k: usize, src: &AnchorSource, partial: bool) -> Vec<TestFunction> {
    let axes: Vec<Vec<Option<f64>>> = (0..dim)
        .map(|i| {
            let mut v: Vec<Option<f64>> = src.axis_anchors(dim, i, k).into_iter().map(Some).collect();
            if partial && dim > 1 {
                v.insert(0, None);
            }
            v
        })
        .collect();
    grid_product(&axes)
        .into_iter()
        .filter(|a| a.iter().any(Option::is_some))
        .map(|anchors| TestFunction::OrthantIndicator { anchors })
        .collect()
}

fn hinges(dirs: &[Vec<f64>], k: usize, src: &AnchorSource, abs: bool) -> Vec<TestFunction> {
    let mut out = Vec::new();
    for theta in dirs {
        for anchor in src.anchors(theta, k) {
            out.push(if abs {
                TestFunction::AbsHinge { direction: theta.clone(), anchor }
            } else {
                TestFunction::Hinge { direction: theta.clone(), anchor }
            });
        }
    }
    out
}

/// Hinge products over every subset of at least two axes.
fn hinge_products(dim: usize, k: usize, src: &AnchorSource, orientation: Orientation) -> Vec<TestFunction> {
    let per_axis: Vec<Vec<f64>> = (0..dim).map(|i| src.axis_anchors(dim, i, k)).collect();
    let mut out = Vec::new();
    for mask in 1u32..(1 << dim) {
        if mask.count_ones() < 2 {
            continue;
        }
        let axes: Vec<Vec<Option<f64>>> = (0..dim)
            .map(|i| {
                if mask & (1 << i) != 0 {
                    per_axis[i].iter().copied().map(Some).collect()
                } else {
                    vec![None]
                }
            })
            .collect();
        out.extend(
            grid_product(&axes)
                .into_iter()
                .map(|anchors| TestFunction::HingeProduct { anchors, orientation }),
        );
    }
    out
}

/// Finite generator family for `class` on `R^dim`.
///
/// Anchors come from empirical 5%-95% quantiles of `sample_hint` when given,
/// otherwise from an equally spaced grid on `[-3, 3]`. In one dimension the
/// supermodular class is vacuous (every function qualifies) and the family
/// is empty; use equality checks instead.
pub fn generate_family(
    class: FunctionClass,
    dim: usize,
    anchors_per_axis: usize,
    sample_hint: Option<&SampleMatrix>,
) -> Result<Vec<TestFunction>> {
    let src = match sample_hint {
        Some(m) => {
            if m.is_empty() {
                return invalid("sample hint must be nonempty");
            }
            if m.dim() != dim {
                return invalid(format!("sample hint has dimension {} (expected {dim})", m.dim()));
            }
            AnchorSource::Sample(m.clone())
        }
        None => AnchorSource::Grid,
    };
    generate_family_with(class, dim, anchors_per_axis, src)
}

/// [`generate_family`] with an explicit anchor source.
pub fn generate_family_with(
    class: FunctionClass,
    dim: usize,
    anchors_per_axis: usize,
    source: AnchorSource,
) -> Result<Vec<TestFunction>> {
    if dim == 0 {
        return invalid("dimension must be at least 1");
    }
    if anchors_per_axis == 0 {
        return invalid("anchors_per_axis must be at least 1");
    }
    let src = source.prepared();
    let k = anchors_per_axis;
    let axes: Vec<Vec<f64>> = (0..dim).map(|i| unit(dim, i)).collect();
    let linear = |dirs: &[Vec<f64>], signs: &[f64]| -> Vec<TestFunction> {
        dirs.iter()
            .flat_map(|d| signs.iter().map(move |&s| TestFunction::Linear { direction: d.clone(), sign: s }))
            .collect()
    };
    let fam = match class {
        FunctionClass::St | FunctionClass::Ism => orthants(dim, k, &src, true),
        FunctionClass::Sm => {
            if dim == 1 {
                Vec::new()
            } else {
                orthants(dim, k, &src, false)
            }
        }
        FunctionClass::Icx => {
            let dirs = direction_grid(dim, true);
            let mut f = hinges(&dirs, k, &src, false);
            f.extend(linear(&dirs, &[1.0]));
            f
        }
        FunctionClass::Cx => cx_family(dim, k, &src),
        FunctionClass::Dcx => {
            if dim == 1 {
                cx_family(dim, k, &src)
            } else {
                let neg_axes: Vec<Vec<f64>> = axes.iter().map(|e| e.iter().map(|x| -x).collect()).collect();
                let mut f = hinges(&axes, k, &src, false);
                f.extend(hinges(&neg_axes, k, &src, false));
                f.extend(linear(&axes, &[1.0, -1.0]));
                f.extend(hinge_products(dim, k, &src, Orientation::Up));
                f.extend(hinge_products(dim, k, &src, Orientation::Down));
                f
            }
        }
        FunctionClass::Idcx => {
            let mut f = hinges(&axes, k, &src, false);
            f.extend(linear(&axes, &[1.0]));
            f.extend(hinge_products(dim, k, &src, Orientation::Up));
            f
        }
    };
    if fam.len() > MAX_FAMILY_SIZE {
        return Err(Error::ResourceLimit(format!(
            "{class} family in dimension {dim} with {k} anchors has {} members (limit {MAX_FAMILY_SIZE})",
            fam.len()
        )));
    }
    Ok(fam)
}

fn cx_family(dim: usize, k: usize, src: &AnchorSource) -> Vec<TestFunction> {
    let half = half_directions(dim);
    let mut f = hinges(&direction_grid(dim, false), k, src, false);
    f.extend(hinges(&half, k, src, true));
    for d in &half {
        for s in [1.0, -1.0] {
            f.push(TestFunction::Linear { direction: d.clone(), sign: s });
        }
    }
    f
}

/// Family on `blocks` stacked copies of `R^block_dim` whose members lie in
/// `class` as a function of each block when the other blocks are held fixed.
///
/// Members are the single-block generators lifted to the stacked space and
/// products of nonnegative generators from distinct blocks (all subsets when
/// there are at most three blocks, pairs otherwise).
pub fn generate_componentwise_family(
    class: FunctionClass,
    block_dim: usize,
    blocks: usize,
    anchors_per_axis: usize,
    source: AnchorSource,
) -> Result<Vec<TestFunction>> {
    if blocks == 0 {
        return invalid("need at least one block");
    }
    let src = source.prepared();
    let per_block: Vec<Vec<TestFunction>> = (0..blocks)
        .map(|b| generate_family_with(class, block_dim, anchors_per_axis, src.for_block(b, block_dim)))
        .collect::<Result<_>>()?;
    let lift = |b: usize, f: &TestFunction| BlockFactor { offset: b * block_dim, function: f.clone() };
    let mut out: Vec<TestFunction> = Vec::new();
    for (b, fam) in per_block.iter().enumerate() {
        out.extend(fam.iter().map(|f| TestFunction::BlockProduct { factors: vec![lift(b, f)] }));
    }
    let nonneg: Vec<Vec<&TestFunction>> =
        per_block.iter().map(|fam| fam.iter().filter(|f| f.is_nonnegative()).collect()).collect();
    for mask in 1u32..(1 << blocks.min(31)) {
        let size = mask.count_ones();
        if size < 2 || (blocks > 3 && size > 2) {
            continue;
        }
        let members: Vec<usize> = (0..blocks).filter(|b| mask & (1 << b) != 0).collect();
        let mut partial: Vec<Vec<BlockFactor>> = vec![Vec::new()];
        for &b in &members {
            let mut next = Vec::with_capacity(partial.len() * nonneg[b].len());
            for p in &partial {
                for f in &nonneg[b] {
                    let mut q = p.clone();
                    q.push(lift(b, f));
                    next.push(q);
                }
            }
            partial = next;
            if out.len() + partial.len() > MAX_FAMILY_SIZE {
                return Err(Error::ResourceLimit(format!(
                    "componentwise {class} family over {blocks} blocks exceeds {MAX_FAMILY_SIZE} members"
                )));
            }
        }
        out.extend(partial.into_iter().map(|factors| TestFunction::BlockProduct { factors }));
    }
    Ok(out)
}

/// Finite-difference membership test of `f` in `class` on a probe set.
///
/// Checks monotonicity by coordinate increments, convexity by the midpoint
/// inequality on probe pairs, supermodularity by the rectangle inequality,
/// and axis convexity by second differences. Returns human-readable
/// descriptions of every violated inequality (empty means "passed").
pub fn membership_violations(f: &TestFunction, class: FunctionClass, probes: &[Vec<f64>]) -> Vec<String> {
    let mut out = Vec::new();
    let tol = |vals: &[f64]| 1e-9 * (1.0 + vals.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let steps = [0.05, 0.5, 2.0];
    for (p, x) in probes.iter().enumerate() {
        let fx = f.eval(x);
        for i in 0..x.len() {
            for &h in &steps {
                let mut up = x.clone();
                up[i] += h;
                let fu = f.eval(&up);
                if class.is_increasing() && fu < fx - tol(&[fx, fu]) {
                    out.push(format!("decrease along axis {i} at probe {p}: {fx} -> {fu}"));
                }
                if class.is_axis_convex() {
                    let mut down = x.clone();
                    down[i] -= h;
                    let fd = f.eval(&down);
                    if fu + fd < 2.0 * fx - tol(&[fu, fd, fx]) {
                        out.push(format!("axis {i} concavity at probe {p} (h = {h})"));
                    }
                }
            }
        }
        if let Some(y) = probes.get((p + 1) % probes.len()) {
            let fy = f.eval(y);
            if class.is_convex() {
                let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
                let fm = f.eval(&mid);
                if fm > 0.5 * (fx + fy) + tol(&[fm, fx, fy]) {
                    out.push(format!("midpoint convexity fails between probes {p} and {}", (p + 1) % probes.len()));
                }
            }
            if class.is_supermodular() {
                let hi: Vec<f64> = x.iter().zip(y).map(|(a, b)| a.max(*b)).collect();
                let lo: Vec<f64> = x.iter().zip(y).map(|(a, b)| a.min(*b)).collect();
                let (fh, fl) = (f.eval(&hi), f.eval(&lo));
                if fh + fl < fx + fy - tol(&[fh, fl, fx, fy]) {
                    out.push(format!("rectangle inequality fails between probes {p} and {}", (p + 1) % probes.len()));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn spec_examples() {
        let st = generate_family(FunctionClass::St, 1, 3, None).unwrap();
        assert_eq!(
            st,
            [-3.0, 0.0, 3.0]
                .map(|a| TestFunction::OrthantIndicator { anchors: vec![Some(a)] })
                .to_vec()
        );
        let icx = generate_family(FunctionClass::Icx, 1, 1, None).unwrap();
        assert_eq!(
            icx,
            vec![
                TestFunction::Hinge { direction: vec![1.0], anchor: 0.0 },
                TestFunction::Linear { direction: vec![1.0], sign: 1.0 },
            ]
        );
        let sm = generate_family(FunctionClass::Sm, 2, 2, None).unwrap();
        assert_eq!(sm.len(), 4);
        for f in &sm {
            match f {
                TestFunction::OrthantIndicator { anchors } => {
                    assert!(anchors.iter().all(|a| matches!(a, Some(x) if x.abs() == 3.0)))
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(generate_family(FunctionClass::Cx, 0, 3, None).is_err());
        assert!(generate_family(FunctionClass::Sm, 1, 3, None).unwrap().is_empty());
    }

    #[test]
    fn quantile_anchors() {
        let hint = SampleMatrix::from_scalars((0..=100).map(|i| i as f64).collect());
        let fam = generate_family(FunctionClass::St, 1, 3, Some(&hint)).unwrap();
        let anchors: Vec<f64> = fam
            .iter()
            .map(|f| match f {
                TestFunction::OrthantIndicator { anchors } => anchors[0].unwrap(),
                _ => unreachable!(),
            })
            .collect();
        for (a, b) in anchors.iter().zip([5.0, 50.0, 95.0]) {
            assert!((a - b).abs() < 1e-9, "{anchors:?}");
        }
        let empty = SampleMatrix::from_scalars(vec![]);
        assert!(generate_family(FunctionClass::St, 1, 3, Some(&empty)).is_err());
    }

    #[test]
    fn direction_grids() {
        assert_eq!(direction_grid(2, false).len(), 8);
        assert_eq!(direction_grid(2, true).len(), 3);
        assert_eq!(half_directions(2).len(), 4);
        for v in direction_grid(5, false) {
            assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(direction_grid(5, true).iter().all(|v| v.iter().all(|x| *x >= 0.0)));
    }

    fn probes(dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..100).map(|_| (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect()).collect()
    }

    #[test]
    fn every_generator_is_a_member() {
        for class in FunctionClass::ALL {
            for dim in 1..=3 {
                let fam = generate_family(class, dim, 3, None).unwrap();
                let pr = probes(dim, 11 + dim as u64);
                for f in &fam {
                    let v = membership_violations(f, class, &pr);
                    assert!(v.is_empty(), "{class} d={dim} {f:?}: {:?}", &v[..1]);
                }
            }
        }
    }

    #[test]
    fn membership_detects_non_members() {
        let pr = probes(2, 5);
        let concave = TestFunction::Linear { direction: vec![1.0, 0.0], sign: -1.0 };
        assert!(!membership_violations(&concave, FunctionClass::Icx, &pr).is_empty());
        let lower = TestFunction::HingeProduct { anchors: vec![Some(0.0), None], orientation: Orientation::Down };
        assert!(!membership_violations(&lower, FunctionClass::St, &pr).is_empty());
        let abs = TestFunction::AbsHinge { direction: vec![1.0, -1.0], anchor: 0.0 };
        assert!(!membership_violations(&abs, FunctionClass::Sm, &pr).is_empty());
    }

    #[test]
    fn componentwise_family_shape() {
        let fam = generate_componentwise_family(FunctionClass::Icx, 1, 2, 3, AnchorSource::Grid).unwrap();
        // 2 x (3 hinges + 1 linear) singles + 3 x 3 hinge pairs
        assert_eq!(fam.len(), 8 + 9);
        let pr = probes(2, 3);
        for f in &fam {
            assert!(membership_violations(f, FunctionClass::Idcx, &pr).is_empty(), "{f:?}");
        }
        let fam = generate_componentwise_family(
            FunctionClass::St,
            1,
            3,
            2,
            AnchorSource::Explicit(vec![0.0, 1.0]),
        )
        .unwrap();
        assert_eq!(fam.len(), 3 * 2 + 3 * 4 + 8);
    }
}
