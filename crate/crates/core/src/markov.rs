//! Exact small-instance oracle for comparing Markov chains on a finite
//! ordered state space: kernel monotonicity, kernel separation and brute-force
//! ordering of finite-dimensional distributions.

use crate::error::{invalid, Error, Result};
use crate::orders::{
    exact_order_check_1d, generate_componentwise_family, generate_family_with, AnchorSource, DiscreteMeasure,
    FunctionClass, TestFunction,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Largest supported state space.
pub const MAX_STATES: usize = 8;
/// Largest supported number of time points.
pub const MAX_HORIZON: usize = 4;
/// Largest joint support enumerated by [`verify_fdd_ordering`].
pub const MAX_JOINT_SUPPORT: usize = 4096;

const ROW_TOL: f64 = 1e-12;
/// Tolerance for comparing exact expectations.
pub const FDD_TOL: f64 = 1e-9;

/// A row-stochastic matrix on strictly increasing scalar states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteKernel {
    states: Vec<f64>,
    matrix: Vec<Vec<f64>>,
}

impl FiniteKernel {
    pub fn new(states: Vec<f64>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let k = states.len();
        if k == 0 || k > MAX_STATES {
            return invalid(format!("kernel needs between 1 and {MAX_STATES} states, got {k}"));
        }
        if states.windows(2).any(|w| !(w[0] < w[1])) || states.iter().any(|s| !s.is_finite()) {
            return invalid("states must be finite and strictly increasing");
        }
        if matrix.len() != k || matrix.iter().any(|r| r.len() != k) {
            return invalid(format!("kernel matrix must be {k} x {k}"));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return invalid(format!("row {i} has a negative or non-finite entry"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return invalid(format!("row {i} sums to {sum}, not 1"));
            }
        }
        Ok(Self { states, matrix })
    }

    pub fn identity(states: Vec<f64>) -> Result<Self> {
        let k = states.len();
        let m = (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self::new(states, m)
    }

    /// Every row equal to `row`.
    pub fn constant(states: Vec<f64>, row: Vec<f64>) -> Result<Self> {
        let k = states.len();
        Self::new(states, vec![row; k])
    }

    /// Reads a kernel from CSV: a header line with the states, followed by
    /// one line of transition probabilities per state.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let parse = |line: &str, what: &str| -> Result<Vec<f64>> {
            line.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad {what} value {v:?}: {e}"))))
                .collect()
        };
        let states = parse(lines.next().ok_or_else(|| Error::InvalidArgument("empty kernel CSV".into()))?, "state")?;
        let matrix = lines.map(|l| parse(l, "probability")).collect::<Result<Vec<_>>>()?;
        Self::new(states, matrix)
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.states.len()
    }

    /// Row `i` as a discrete distribution (zero entries dropped).
    pub fn row(&self, i: usize) -> DiscreteMeasure {
        distribution(&self.states, &self.matrix[i])
    }

    /// `(Q h)(x_i) = sum_j Q(i, j) h(x_j)`.
    pub fn apply<H: Fn(f64) -> f64>(&self, h: H) -> Vec<f64> {
        self.matrix.iter().map(|row| row.iter().zip(&self.states).map(|(p, y)| p * h(*y)).sum()).collect()
    }
}

fn distribution(states: &[f64], probs: &[f64]) -> DiscreteMeasure {
    let pairs: Vec<(f64, f64)> = states.iter().zip(probs).filter(|(_, p)| **p > 0.0).map(|(s, p)| (*s, *p)).collect();
    DiscreteMeasure::from_1d(&pairs).expect("probability rows have positive mass")
}

/// Initial law, kernel and number of time points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteChainSpec {
    pub initial: Vec<f64>,
    pub kernel: FiniteKernel,
    pub horizon: usize,
}

impl FiniteChainSpec {
    pub fn new(initial: Vec<f64>, kernel: FiniteKernel, horizon: usize) -> Result<Self> {
        if initial.len() != kernel.size() {
            return invalid(format!("initial law has {} entries, kernel {} states", initial.len(), kernel.size()));
        }
        if initial.iter().any(|p| !(*p >= 0.0)) || (initial.iter().sum::<f64>() - 1.0).abs() > ROW_TOL {
            return invalid("initial law must be a probability vector");
        }
        if horizon == 0 || horizon > MAX_HORIZON {
            return invalid(format!("horizon must be between 1 and {MAX_HORIZON}, got {horizon}"));
        }
        Ok(Self { initial, kernel, horizon })
    }

    pub fn initial_distribution(&self) -> DiscreteMeasure {
        distribution(&self.kernel.states, &self.initial)
    }
}

fn check_class(class: FunctionClass) -> Result<()> {
    match class {
        FunctionClass::St | FunctionClass::Icx | FunctionClass::Cx => Ok(()),
        other => Err(Error::Unsupported(format!("finite-chain oracle supports ST, ICX and CX, not {other}"))),
    }
}

fn nondecreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] - w[0] >= -ROW_TOL * (1.0 + w[0].abs().max(w[1].abs())))
}

fn discrete_convex(x: &[f64], v: &[f64]) -> bool {
    (1..v.len().saturating_sub(1)).all(|i| {
        let left = (v[i] - v[i - 1]) / (x[i] - x[i - 1]);
        let right = (v[i + 1] - v[i]) / (x[i + 1] - x[i]);
        right - left >= -ROW_TOL * (1.0 + left.abs().max(right.abs()))
    })
}

/// Whether `Q` maps the class into itself on the state space
/// (`h in F => Qh in F`).
///
/// * ST: rows are stochastically increasing in the state (adjacent pairs
///   suffice by transitivity).
/// * ICX: `Qh` is nondecreasing and convex over the states for `h(y) = y` and
///   every hinge `(y - x_k)+`; these generate all increasing convex functions
///   restricted to the states.
/// * CX: `Qy` is affine, every `Q(y - x_k)+` is convex, and so is every
///   product `a(x) (Qb)(x)` of nonnegative hinges `a`, `b` in either
///   direction.
///
/// For ICX and CX this is stronger than adjacent rows being ordered, which
/// does not guarantee that `Qh` stays convex. The product condition is what
/// the path comparison needs on two or more time points: integrating
/// `f(x, y) = a(x) b(y)` against `Q(x, dy)` gives `a Qb`, and for a
/// decreasing `a` and an increasing convex `Qb` that product can fail to be
/// convex. For ST and ICX the product of nonnegative class members stays in
/// the class, so no extra check is needed there.
pub fn kernel_monotone(q: &FiniteKernel, class: FunctionClass) -> Result<bool> {
    check_class(class)?;
    let x = q.states();
    if class == FunctionClass::St {
        for i in 1..q.size() {
            if !exact_order_check_1d(&q.row(i - 1), &q.row(i), FunctionClass::St)? {
                return Ok(false);
            }
        }
        return Ok(true);
    }
    let linear = q.apply(|y| y);
    if class == FunctionClass::Icx {
        if !(nondecreasing(&linear) && discrete_convex(x, &linear)) {
            return Ok(false);
        }
    } else {
        let neg: Vec<f64> = linear.iter().map(|v| -v).collect();
        if !(discrete_convex(x, &linear) && discrete_convex(x, &neg)) {
            return Ok(false);
        }
    }
    for &a in x {
        let v = q.apply(|y| (y - a).max(0.0));
        if !discrete_convex(x, &v) || (class == FunctionClass::Icx && !nondecreasing(&v)) {
            return Ok(false);
        }
    }
    if class == FunctionClass::Cx {
        let hinges: Vec<(f64, f64)> = x.iter().flat_map(|&k| [(1.0, k), (-1.0, k)]).collect();
        for &(sb, kb) in &hinges {
            let qb = q.apply(|y| (sb * (y - kb)).max(0.0));
            for &(sa, ka) in &hinges {
                let prod: Vec<f64> = x.iter().zip(&qb).map(|(xi, v)| (sa * (xi - ka)).max(0.0) * v).collect();
                if !discrete_convex(x, &prod) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Which inequality of `Q1(x) <= Q(x) <= Q2(x)` fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Side {
    Lower,
    Upper,
}

/// First state (and side) at which the rowwise separation fails.
pub fn separation_witness(
    q1: &FiniteKernel,
    q: &FiniteKernel,
    q2: &FiniteKernel,
    class: FunctionClass,
) -> Result<Option<(usize, Side)>> {
    check_class(class)?;
    if q1.states() != q.states() || q2.states() != q.states() {
        return invalid("kernels must share the same state list");
    }
    for i in 0..q.size() {
        if !exact_order_check_1d(&q1.row(i), &q.row(i), class)? {
            return Ok(Some((i, Side::Lower)));
        }
        if !exact_order_check_1d(&q.row(i), &q2.row(i), class)? {
            return Ok(Some((i, Side::Upper)));
        }
    }
    Ok(None)
}

/// `Q1(x, .) <=_F Q(x, .) <=_F Q2(x, .)` for every state `x`.
pub fn kernel_separated(q1: &FiniteKernel, q: &FiniteKernel, q2: &FiniteKernel, class: FunctionClass) -> Result<bool> {
    Ok(separation_witness(q1, q, q2, class)?.is_none())
}

/// Exact law of `(X_0, ..., X_{m-1})`.
pub fn joint_distribution(c: &FiniteChainSpec, m: usize) -> Result<DiscreteMeasure> {
    if m == 0 || m > MAX_HORIZON {
        return invalid(format!("horizon must be between 1 and {MAX_HORIZON}, got {m}"));
    }
    let k = c.kernel.size();
    let support = k.pow(m as u32);
    if support > MAX_JOINT_SUPPORT {
        return Err(Error::ResourceLimit(format!("{k}^{m} = {support} paths exceed {MAX_JOINT_SUPPORT}")));
    }
    let x = c.kernel.states();
    let q = c.kernel.matrix();
    let mut pairs = Vec::new();
    for code in 0..support {
        let mut idx = vec![0usize; m];
        let mut r = code;
        for slot in idx.iter_mut().rev() {
            *slot = r % k;
            r /= k;
        }
        let mut w = c.initial[idx[0]];
        for t in 1..m {
            w *= q[idx[t - 1]][idx[t]];
        }
        if w > 0.0 {
            pairs.push((idx.iter().map(|i| x[*i]).collect::<Vec<f64>>(), w));
        }
    }
    DiscreteMeasure::from_points(&pairs)
}

/// A generator function on which the two chains are ordered the wrong way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub id: usize,
    pub function: TestFunction,
    pub expectation_1: f64,
    pub expectation_2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FddVerdict {
    pub class: FunctionClass,
    pub horizon: usize,
    pub holds: bool,
    pub family_size: usize,
    /// The most violated generator when `holds` is false.
    pub witness: Option<Witness>,
}

impl FddVerdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

/// Checks `E f(X^(1)) <= E f(X^(2))` exactly for every member of the
/// componentwise generator family on `m` time points, with anchors at the
/// states.
pub fn verify_fdd_ordering(
    c1: &FiniteChainSpec,
    c2: &FiniteChainSpec,
    class: FunctionClass,
    m: usize,
) -> Result<FddVerdict> {
    check_class(class)?;
    if c1.kernel.states() != c2.kernel.states() {
        return invalid("chains must share the same state list");
    }
    let j1 = joint_distribution(c1, m)?;
    let j2 = joint_distribution(c2, m)?;
    let states = c1.kernel.states().to_vec();
    let k = states.len();
    let family = if m == 1 {
        generate_family_with(class, 1, k, AnchorSource::Explicit(states))?
    } else {
        generate_componentwise_family(class, 1, m, k, AnchorSource::Explicit(states))?
    };
    let mut worst: Option<(f64, Witness)> = None;
    for (id, f) in family.iter().enumerate() {
        let e1 = j1.integrate(|x| f.eval(x));
        let e2 = j2.integrate(|x| f.eval(x));
        let gap = e1 - e2;
        if gap > FDD_TOL * (1.0 + e1.abs().max(e2.abs())) && worst.as_ref().is_none_or(|(g, _)| gap > *g) {
            worst = Some((gap, Witness { id, function: f.clone(), expectation_1: e1, expectation_2: e2 }));
        }
    }
    Ok(FddVerdict { class, horizon: m, holds: worst.is_none(), family_size: family.len(), witness: worst.map(|(_, w)| w) })
}

/// A randomly generated instance satisfying the hypotheses of the chain
/// comparison: ordered initial laws, a class-monotone kernel `Q` and
/// kernels `Q1`, `Q2` separated by it row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedInstance {
    pub class: FunctionClass,
    pub chain1: FiniteChainSpec,
    pub middle: FiniteKernel,
    pub chain2: FiniteChainSpec,
}

fn random_pmf<R: rand::Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn cdf(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    *out.last_mut().expect("nonempty") = 1.0;
    out
}

fn pmf(f: &[f64]) -> Vec<f64> {
    (0..f.len()).map(|j| if j == 0 { f[0] } else { (f[j] - f[j - 1]).max(0.0) }).collect()
}

/// Stochastically smaller (`up = false`) or larger version of `p`.
fn push<R: rand::Rng + ?Sized>(rng: &mut R, p: &[f64], up: bool) -> Vec<f64> {
    let f = cdf(p);
    let a = 0.05 + 0.45 * rng.random::<f64>();
    let k = f.len();
    let g: Vec<f64> = f
        .iter()
        .enumerate()
        .map(|(j, v)| if j + 1 == k { 1.0 } else if up { v * (1.0 - a) } else { v + a * (1.0 - v) })
        .collect();
    pmf(&g)
}

/// Mean-preserving spread (`spread = true`) or contraction of `p` on
/// equidistant states.
fn reshape<R: rand::Rng + ?Sized>(rng: &mut R, p: &[f64], spread: bool) -> Vec<f64> {
    let k = p.len();
    let mut q = p.to_vec();
    if k < 3 {
        return q;
    }
    for _ in 0..2 {
        let j = 1 + rng.random_range(0..k - 2);
        let u = 0.1 + 0.4 * rng.random::<f64>();
        if spread {
            let e = 0.5 * q[j] * u;
            q[j] -= 2.0 * e;
            q[j - 1] += e;
            q[j + 1] += e;
        } else {
            let e = q[j - 1].min(q[j + 1]) * u;
            q[j - 1] -= e;
            q[j + 1] -= e;
            q[j] += 2.0 * e;
        }
    }
    q
}

fn shrink<R: rand::Rng + ?Sized>(rng: &mut R, p: &[f64], class: FunctionClass) -> Vec<f64> {
    match class {
        FunctionClass::Cx => reshape(rng, p, false),
        _ => push(rng, p, false),
    }
}

fn grow<R: rand::Rng + ?Sized>(rng: &mut R, p: &[f64], class: FunctionClass) -> Vec<f64> {
    match class {
        FunctionClass::Cx => reshape(rng, p, true),
        _ => push(rng, p, true),
    }
}

fn normalized(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Draws a random separated instance on `k` equidistant states.
///
/// ST kernels sort a random CDF matrix columnwise. ICX and CX kernels are
/// mixtures `Q(x_i) = sum_r c_r(i) D_r` of a chain `D_0 <= D_1 <= ...` in
/// the class order with cumulative weights convex in the state (and
/// increasing for ICX), so `Qh` inherits convexity. Outer kernels and the
/// initial laws are stochastic shifts (ST, ICX) or mean-preserving
/// contractions and spreads (CX). CX middle kernels are additionally pulled
/// toward their average row until they pass [`kernel_monotone`].
pub fn random_separated_instance<R: rand::Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    class: FunctionClass,
    horizon: usize,
) -> Result<SeparatedInstance> {
    check_class(class)?;
    if !(2..=MAX_STATES).contains(&k) {
        return invalid(format!("need between 2 and {MAX_STATES} states"));
    }
    let states: Vec<f64> = (0..k).map(|i| i as f64).collect();
    let middle_rows: Vec<Vec<f64>> = match class {
        FunctionClass::St => {
            let mut f: Vec<Vec<f64>> = (0..k).map(|_| cdf(&random_pmf(rng, k))).collect();
            for j in 0..k {
                let mut col: Vec<f64> = f.iter().map(|r| r[j]).collect();
                col.sort_by(|a, b| b.total_cmp(a));
                for (i, v) in col.into_iter().enumerate() {
                    f[i][j] = v;
                }
            }
            f.iter().map(|r| pmf(r)).collect()
        }
        _ => {
            let levels = 1 + rng.random_range(1..4usize);
            let mut chain = vec![random_pmf(rng, k)];
            for _ in 1..levels {
                let last = chain.last().expect("nonempty").clone();
                chain.push(grow(rng, &last, class));
            }
            // Cumulative weights C_r(x) = s_r x^{g_r}, decreasing in r.
            let mut s = 1.0;
            let mut g = 1.0;
            let mut cum: Vec<(f64, f64)> = vec![(1.0, 0.0)];
            for _ in 1..levels {
                s *= 0.3 + 0.7 * rng.random::<f64>();
                g += 2.0 * rng.random::<f64>();
                cum.push((s, g));
            }
            (0..k)
                .map(|i| {
                    let x = i as f64 / (k - 1) as f64;
                    let c: Vec<f64> = cum.iter().map(|(s, g)| if *g == 0.0 { *s } else { s * x.powf(*g) }).collect();
                    let mut row = vec![0.0; k];
                    for r in 0..levels {
                        let w = c[r] - if r + 1 < levels { c[r + 1] } else { 0.0 };
                        for j in 0..k {
                            row[j] += w * chain[r][j];
                        }
                    }
                    row
                })
                .collect()
        }
    };
    let mut middle_rows = normalized(middle_rows);
    if class == FunctionClass::Cx {
        // Pull the rows toward their average until the kernel is monotone;
        // a state-independent kernel always is.
        let avg: Vec<f64> = (0..k).map(|j| middle_rows.iter().map(|r| r[j]).sum::<f64>() / k as f64).collect();
        let original = middle_rows.clone();
        let mut theta = 1.0;
        while !kernel_monotone(&FiniteKernel::new(states.clone(), middle_rows.clone())?, class)? {
            theta *= 0.5;
            let t = if theta < 1e-6 { 0.0 } else { theta };
            middle_rows = normalized(
                original.iter().map(|r| r.iter().zip(&avg).map(|(v, m)| t * v + (1.0 - t) * m).collect()).collect(),
            );
            if t == 0.0 {
                break;
            }
        }
    }
    let lower = normalized(middle_rows.iter().map(|r| shrink(rng, r, class)).collect());
    let upper = normalized(middle_rows.iter().map(|r| grow(rng, r, class)).collect());
    let init2 = random_pmf(rng, k);
    let init1 = normalized(vec![shrink(rng, &init2, class)]).remove(0);
    let middle = FiniteKernel::new(states.clone(), middle_rows)?;
    Ok(SeparatedInstance {
        class,
        chain1: FiniteChainSpec::new(init1, FiniteKernel::new(states.clone(), lower)?, horizon)?,
        middle,
        chain2: FiniteChainSpec::new(init2, FiniteKernel::new(states, upper)?, horizon)?,
    })
}
