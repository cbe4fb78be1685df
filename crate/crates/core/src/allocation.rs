//! Repartition keys: how local generation is split among members period by
//! period.
//!
//! A key `G` (`T x N`, kWh) is feasible for generation `g` and load `L` when
//! `0 <= G <= L` elementwise and every row sums to `min(g_t, sum_n L_tn)`.
//! All rules below produce feasible keys by construction; [`project_key`]
//! repairs an arbitrary proposal.

use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1};
use serde::Serialize;

use crate::error::{Error, Result};

/// Absolute feasibility tolerance, kWh.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// A `T x N` allocation of local energy.
#[derive(Debug, Clone, PartialEq)]
pub struct RepartitionKey(pub Array2<f64>);

impl RepartitionKey {
    pub fn zeros(periods: usize, members: usize) -> Self {
        Self(Array2::zeros((periods, members)))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Allocated energy per period.
    pub fn row_sums(&self) -> Vec<f64> {
        self.0.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.0.sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    BelowZero,
    AboveLoad,
    RowSum,
}

/// Where a key leaves the feasible set. `member` is `None` for row-sum
/// violations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyViolation {
    pub period: usize,
    pub member: Option<usize>,
    pub kind: ViolationKind,
    pub value: f64,
    pub bound: f64,
}

impl fmt::Display for KeyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.member) {
            (ViolationKind::RowSum, _) => write!(
                f,
                "period {}: allocated sum {} != {}",
                self.period + 1,
                self.value,
                self.bound
            ),
            (kind, Some(m)) => write!(
                f,
                "period {} member {}: {} {} {}",
                self.period + 1,
                m + 1,
                self.value,
                if kind == ViolationKind::BelowZero { "<" } else { ">" },
                self.bound
            ),
            (_, None) => write!(f, "period {}: bound violation", self.period + 1),
        }
    }
}

fn check_dims(g: &[f64], load: ArrayView2<f64>) -> Result<()> {
    if g.len() != load.nrows() {
        return Err(Error::Dimension(format!(
            "generation has {} periods, load has {}",
            g.len(),
            load.nrows()
        )));
    }
    Ok(())
}

fn row_target(g_t: f64, load_row: ArrayView1<f64>) -> f64 {
    g_t.min(load_row.sum())
}

/// Checks membership in the feasible set and lists every violation.
pub fn is_feasible_key(
    key: ArrayView2<f64>,
    g: &[f64],
    load: ArrayView2<f64>,
    tol: f64,
) -> Result<(bool, Vec<KeyViolation>)> {
    check_dims(g, load)?;
    if key.dim() != load.dim() {
        return Err(Error::Dimension(format!(
            "key is {:?}, load is {:?}",
            key.dim(),
            load.dim()
        )));
    }
    let mut violations = Vec::new();
    for (t, (row, lrow)) in key.rows().into_iter().zip(load.rows()).enumerate() {
        for (n, (&x, &l)) in row.iter().zip(lrow.iter()).enumerate() {
            if x < -tol || x.is_nan() {
                violations.push(KeyViolation {
                    period: t,
                    member: Some(n),
                    kind: ViolationKind::BelowZero,
                    value: x,
                    bound: 0.0,
                });
            } else if x > l + tol {
                violations.push(KeyViolation {
                    period: t,
                    member: Some(n),
                    kind: ViolationKind::AboveLoad,
                    value: x,
                    bound: l,
                });
            }
        }
        let target = row_target(g[t], lrow);
        let sum = row.sum();
        if !((sum - target).abs() <= tol) {
            violations.push(KeyViolation {
                period: t,
                member: None,
                kind: ViolationKind::RowSum,
                value: sum,
                bound: target,
            });
        }
    }
    Ok((violations.is_empty(), violations))
}

/// Default rule: share `min(g_t, sum L_t)` in proportion to each member's
/// load. Periods with no load allocate nothing.
pub fn default_pro_rata_key(g: &[f64], load: ArrayView2<f64>) -> Result<RepartitionKey> {
    check_dims(g, load)?;
    let mut key = Array2::zeros(load.dim());
    for ((mut out, lrow), &g_t) in key.rows_mut().into_iter().zip(load.rows()).zip(g) {
        let total = lrow.sum();
        if total <= 0.0 {
            continue;
        }
        if g_t >= total {
            out.assign(&lrow);
        } else {
            let ratio = g_t / total;
            out.zip_mut_with(&lrow, |o, &l| *o = l * ratio);
        }
    }
    Ok(RepartitionKey(key))
}

/// Fills members in the given order, each up to its load.
pub fn priority_key(g: &[f64], load: ArrayView2<f64>, order: &[usize]) -> Result<RepartitionKey> {
    check_dims(g, load)?;
    let n = load.ncols();
    let mut seen = vec![false; n];
    if order.len() != n || !order.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true)) {
        return Err(Error::NotPermutation(n));
    }
    let mut key = Array2::zeros(load.dim());
    for ((mut out, lrow), &g_t) in key.rows_mut().into_iter().zip(load.rows()).zip(g) {
        let mut remaining = row_target(g_t, lrow);
        for &m in order {
            if remaining <= 0.0 {
                break;
            }
            let take = remaining.min(lrow[m]);
            out[m] = take;
            remaining -= take;
        }
    }
    Ok(RepartitionKey(key))
}

/// Splits `amount` among `active` members by weight, clamping at capacity
/// and re-spreading the clamped excess until nothing is left over. Returns
/// the amount that could not be placed (only non-zero when every active
/// member is clamped).
fn water_fill(
    out: &mut ArrayViewMut1<f64>,
    caps: ArrayView1<f64>,
    weights: &[f64],
    mut active: Vec<usize>,
    mut amount: f64,
) -> f64 {
    while amount > 0.0 && !active.is_empty() {
        let wsum: f64 = active.iter().map(|&i| weights[i]).sum();
        if wsum <= 0.0 {
            break;
        }
        let clamped: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| out[i] + amount * weights[i] / wsum >= caps[i])
            .collect();
        if clamped.is_empty() {
            for &i in &active {
                out[i] += amount * weights[i] / wsum;
            }
            return 0.0;
        }
        for &i in &clamped {
            amount -= caps[i] - out[i];
            out[i] = caps[i];
        }
        active.retain(|i| !clamped.contains(i));
    }
    amount.max(0.0)
}

/// Splits `min(g_t, sum L_t)` by fixed weights. Members reaching their load
/// are clamped and the excess is re-spread over the remaining weighted
/// members; once all weighted members are full, whatever is left goes to
/// the zero-weight members in proportion to their load.
pub fn fixed_ratio_key(g: &[f64], load: ArrayView2<f64>, weights: &[f64]) -> Result<RepartitionKey> {
    check_dims(g, load)?;
    let n = load.ncols();
    if weights.len() != n {
        return Err(Error::Dimension(format!(
            "{} weights for {n} members",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::ZeroWeights);
    }
    let weighted: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    let unweighted: Vec<usize> = (0..n).filter(|&i| weights[i] == 0.0).collect();

    let mut key = Array2::zeros(load.dim());
    for ((mut out, lrow), &g_t) in key.rows_mut().into_iter().zip(load.rows()).zip(g) {
        let target = row_target(g_t, lrow);
        if target <= 0.0 {
            continue;
        }
        if g_t >= lrow.sum() {
            out.assign(&lrow);
            continue;
        }
        let left = water_fill(&mut out, lrow, weights, weighted.clone(), target);
        if left > 0.0 {
            let caps: Vec<f64> = lrow.iter().copied().collect();
            let rest = water_fill(&mut out, lrow, &caps, unweighted.clone(), left);
            debug_assert!(rest <= FEASIBILITY_TOL);
        }
    }
    Ok(RepartitionKey(key))
}

fn row_is_feasible(row: ArrayView1<f64>, lrow: ArrayView1<f64>, target: f64) -> bool {
    row.iter()
        .zip(lrow.iter())
        .all(|(&x, &l)| x >= 0.0 && x <= l)
        && (row.sum() - target).abs() <= FEASIBILITY_TOL
}

/// Euclidean projection of `y` onto `{x | 0 <= x <= cap, sum x = target}`.
///
/// The solution is `x_i = clamp(y_i - lambda, 0, cap_i)`; `lambda` is found
/// exactly by walking the sorted breakpoints of the piecewise-linear sum.
fn project_row(y: ArrayView1<f64>, cap: ArrayView1<f64>, target: f64) -> Vec<f64> {
    let n = y.len();
    if target <= 0.0 {
        return vec![0.0; n];
    }
    if target >= cap.sum() {
        return cap.to_vec();
    }
    let fill = |lambda: f64| -> f64 {
        y.iter()
            .zip(cap.iter())
            .map(|(&yi, &ci)| (yi - lambda).clamp(0.0, ci))
            .sum()
    };
    let mut breaks: Vec<f64> = Vec::with_capacity(2 * n);
    for (&yi, &ci) in y.iter().zip(cap.iter()) {
        breaks.push(yi - ci);
        breaks.push(yi);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    // fill is non-increasing in lambda: fill(min break) = sum cap, fill(max) = 0.
    let mut lambda = *breaks.last().unwrap_or(&0.0);
    let mut prev = (breaks[0], fill(breaks[0]));
    if prev.1 <= target {
        lambda = breaks[0];
    } else {
        for &b in &breaks[1..] {
            let f = fill(b);
            if f <= target {
                let (b0, f0) = prev;
                lambda = if f0 > f { b0 + (f0 - target) * (b - b0) / (f0 - f) } else { b };
                break;
            }
            prev = (b, f);
        }
    }
    let mut x: Vec<f64> = y
        .iter()
        .zip(cap.iter())
        .map(|(&yi, &ci)| (yi - lambda).clamp(0.0, ci))
        .collect();

    // Absorb rounding residue in members with slack.
    let mut residue = target - x.iter().sum::<f64>();
    for i in 0..n {
        if residue == 0.0 {
            break;
        }
        let new = (x[i] + residue).clamp(0.0, cap[i]);
        residue -= new - x[i];
        x[i] = new;
    }
    x
}

/// Nearest feasible key (row-wise Euclidean projection). Rows that are
/// already feasible are returned untouched.
pub fn project_key(
    proposed: ArrayView2<f64>,
    g: &[f64],
    load: ArrayView2<f64>,
) -> Result<RepartitionKey> {
    check_dims(g, load)?;
    if proposed.dim() != load.dim() {
        return Err(Error::Dimension(format!(
            "proposed key is {:?}, load is {:?}",
            proposed.dim(),
            load.dim()
        )));
    }
    let mut key = proposed.to_owned();
    for ((mut out, lrow), &g_t) in key.rows_mut().into_iter().zip(load.rows()).zip(g) {
        let target = row_target(g_t, lrow);
        if row_is_feasible(out.view(), lrow, target) {
            continue;
        }
        let projected = project_row(out.view(), lrow, target);
        out.iter_mut().zip(projected).for_each(|(o, p)| *o = p);
    }
    Ok(RepartitionKey(key))
}

/// Energy each member still buys from its supplier, `R = L - G`.
pub fn residual_load(load: ArrayView2<f64>, key: ArrayView2<f64>) -> Result<Array2<f64>> {
    if key.dim() != load.dim() {
        return Err(Error::Dimension(format!(
            "key is {:?}, load is {:?}",
            key.dim(),
            load.dim()
        )));
    }
    let mut bad = Vec::new();
    for ((t, n), &x) in key.indexed_iter() {
        let l = load[[t, n]];
        if x < -FEASIBILITY_TOL || x > l + FEASIBILITY_TOL || x.is_nan() {
            bad.push(KeyViolation {
                period: t,
                member: Some(n),
                kind: if x < 0.0 { ViolationKind::BelowZero } else { ViolationKind::AboveLoad },
                value: x,
                bound: if x < 0.0 { 0.0 } else { l },
            });
        }
    }
    if !bad.is_empty() {
        return Err(Error::InfeasibleKey(bad));
    }
    Ok(ndarray::Zip::from(load)
        .and(key)
        .map_collect(|&l, &x| (l - x).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn feasible(key: &RepartitionKey, g: &[f64], l: &Array2<f64>) -> bool {
        is_feasible_key(key.0.view(), g, l.view(), FEASIBILITY_TOL).unwrap().0
    }

    #[test]
    fn feasibility_examples() {
        let l = array![[6.0, 4.0]];
        let (ok, v) = is_feasible_key(array![[3.0, 2.0]].view(), &[5.0], l.view(), 1e-9).unwrap();
        assert!(ok && v.is_empty());

        let (ok, v) = is_feasible_key(array![[4.0, 2.0]].view(), &[5.0], l.view(), 1e-9).unwrap();
        assert!(!ok);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::RowSum);
        assert_eq!((v[0].value, v[0].bound), (6.0, 5.0));

        let (ok, v) = is_feasible_key(array![[7.0, -2.0]].view(), &[5.0], l.view(), 1e-9).unwrap();
        assert!(!ok);
        let kinds: Vec<_> = v.iter().map(|x| (x.member, x.kind)).collect();
        assert_eq!(
            kinds,
            vec![(Some(0), ViolationKind::AboveLoad), (Some(1), ViolationKind::BelowZero)]
        );
    }

    #[test]
    fn feasibility_dimension_mismatch() {
        let l = array![[6.0, 4.0]];
        assert!(is_feasible_key(array![[3.0]].view(), &[5.0], l.view(), 1e-9).is_err());
        assert!(is_feasible_key(array![[3.0, 2.0]].view(), &[5.0, 1.0], l.view(), 1e-9).is_err());
    }

    #[test]
    fn pro_rata_examples() {
        let l = array![[6.0, 4.0], [6.0, 4.0], [0.0, 0.0]];
        let key = default_pro_rata_key(&[5.0, 20.0, 5.0], l.view()).unwrap();
        assert_eq!(key.0, array![[3.0, 2.0], [6.0, 4.0], [0.0, 0.0]]);
    }

    #[test]
    fn priority_examples() {
        let l = array![[6.0, 4.0], [6.0, 4.0]];
        let g = [5.0, 0.0];
        let key = priority_key(&g, l.view(), &[1, 0]).unwrap();
        assert_eq!(key.0, array![[1.0, 4.0], [0.0, 0.0]]);
        let key = priority_key(&g, l.view(), &[0, 1]).unwrap();
        assert_eq!(key.0, array![[5.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn priority_rejects_non_permutation() {
        let l = array![[6.0, 4.0]];
        assert!(matches!(priority_key(&[5.0], l.view(), &[0, 0]), Err(Error::NotPermutation(2))));
        assert!(priority_key(&[5.0], l.view(), &[0]).is_err());
        assert!(priority_key(&[5.0], l.view(), &[0, 2]).is_err());
    }

    #[test]
    fn fixed_ratio_examples() {
        let key = fixed_ratio_key(&[6.0], array![[10.0, 10.0]].view(), &[1.0, 2.0]).unwrap();
        assert_eq!(key.0, array![[2.0, 4.0]]);
        let key = fixed_ratio_key(&[6.0], array![[1.0, 10.0]].view(), &[1.0, 1.0]).unwrap();
        assert_eq!(key.0, array![[1.0, 5.0]]);
        let key = fixed_ratio_key(&[3.0], array![[2.0, 5.0]].view(), &[1.0, 0.0]).unwrap();
        assert_eq!(key.0, array![[2.0, 1.0]]);
    }

    /// Two-member water-filling by hand: give each its weighted share; if one
    /// overshoots its load, pin it there and hand the rest to the other.
    fn two_member_oracle(g: f64, l: [f64; 2], w: [f64; 2]) -> [f64; 2] {
        let s = g.min(l[0] + l[1]);
        let share = [s * w[0] / (w[0] + w[1]), s * w[1] / (w[0] + w[1])];
        if share[0] > l[0] {
            [l[0], s - l[0]]
        } else if share[1] > l[1] {
            [s - l[1], l[1]]
        } else {
            share
        }
    }

    #[test]
    fn fixed_ratio_matches_two_member_oracle() {
        for (g, l, w) in [
            (6.0, [1.0, 10.0], [1.0, 1.0]),
            (3.0, [2.0, 5.0], [1.0, 0.0]),
            (9.0, [4.0, 7.0], [3.0, 1.0]),
            (2.0, [4.0, 7.0], [3.0, 1.0]),
        ] {
            let key = fixed_ratio_key(&[g], array![[l[0], l[1]]].view(), &w).unwrap();
            let expect = two_member_oracle(g, l, w);
            for i in 0..2 {
                assert!((key.0[[0, i]] - expect[i]).abs() < 1e-12, "{g} {l:?} {w:?}");
            }
        }
    }

    #[test]
    fn fixed_ratio_rejects_zero_weights() {
        let l = array![[6.0, 4.0]];
        assert!(matches!(fixed_ratio_key(&[5.0], l.view(), &[0.0, 0.0]), Err(Error::ZeroWeights)));
        assert!(fixed_ratio_key(&[5.0], l.view(), &[1.0, -1.0]).is_err());
    }

    /// Exhaustive grid search over the feasible slice for N <= 2 members:
    /// x_1 ranges over the grid, x_2 is fixed by the row sum.
    fn grid_projection_2(y: [f64; 2], cap: [f64; 2], target: f64, step: f64) -> [f64; 2] {
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        let steps = (cap[0] / step).round() as usize;
        for k in 0..=steps {
            let a = k as f64 * step;
            let b = target - a;
            if b < -1e-12 || b > cap[1] + 1e-12 {
                continue;
            }
            let d = (a - y[0]).powi(2) + (b - y[1]).powi(2);
            if d < best.0 {
                best = (d, [a, b]);
            }
        }
        best.1
    }

    #[test]
    fn projection_examples() {
        let l = array![[6.0, 4.0]];
        let feasible_in = array![[3.5, 1.5]];
        assert_eq!(project_key(feasible_in.view(), &[5.0], l.view()).unwrap().0, feasible_in);

        // [5, 5] lands on the centre of the slice, not on the pro-rata point [3, 2].
        for (y, expect) in [([5.0, 5.0], [2.5, 2.5]), ([0.0, 0.0], [2.5, 2.5]), ([9.0, 1.0], [5.0, 0.0])] {
            let oracle = grid_projection_2(y, [6.0, 4.0], 5.0, 1e-3);
            assert!((oracle[0] - expect[0]).abs() < 1e-9 && (oracle[1] - expect[1]).abs() < 1e-9, "{oracle:?}");
            let key = project_key(array![[y[0], y[1]]].view(), &[5.0], l.view()).unwrap();
            for i in 0..2 {
                assert!((key.0[[0, i]] - expect[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn residual_examples() {
        let l = array![[6.0, 4.0]];
        assert_eq!(residual_load(l.view(), array![[3.0, 2.0]].view()).unwrap(), array![[3.0, 2.0]]);
        assert_eq!(residual_load(l.view(), l.view()).unwrap(), array![[0.0, 0.0]]);
        assert_eq!(residual_load(l.view(), Array2::zeros((1, 2)).view()).unwrap(), l);
        assert!(matches!(
            residual_load(l.view(), array![[7.0, 0.0]].view()),
            Err(Error::InfeasibleKey(_))
        ));
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Array2<f64>, Array2<f64>, Vec<f64>, Vec<usize>)> {
        (1usize..12, 1usize..6).prop_flat_map(|(t, n)| {
            (
                prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..50.0], t),
                prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..50.0], t * n),
                prop::collection::vec(-20.0f64..60.0, t * n),
                prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], n),
                Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
            )
                .prop_map(move |(g, l, p, mut w, order)| {
                    if w.iter().sum::<f64>() <= 0.0 {
                        w[0] = 1.0;
                    }
                    (
                        g,
                        Array2::from_shape_vec((t, n), l).unwrap(),
                        Array2::from_shape_vec((t, n), p).unwrap(),
                        w,
                        order,
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn every_rule_is_feasible((g, l, p, w, order) in instance()) {
            let keys = [
                default_pro_rata_key(&g, l.view()).unwrap(),
                priority_key(&g, l.view(), &order).unwrap(),
                fixed_ratio_key(&g, l.view(), &w).unwrap(),
                project_key(p.view(), &g, l.view()).unwrap(),
            ];
            for key in &keys {
                prop_assert!(feasible(key, &g, &l));
                for (kc, lc) in key.0.columns().into_iter().zip(l.columns()) {
                    prop_assert!(kc.sum() <= lc.sum() + 1e-9);
                }
            }
        }

        #[test]
        fn zero_generation_gives_zero_key((g, l, p, w, order) in instance()) {
            let g = vec![0.0; g.len()];
            let zero = Array2::zeros(l.dim());
            prop_assert_eq!(&default_pro_rata_key(&g, l.view()).unwrap().0, &zero);
            prop_assert_eq!(&priority_key(&g, l.view(), &order).unwrap().0, &zero);
            prop_assert_eq!(&fixed_ratio_key(&g, l.view(), &w).unwrap().0, &zero);
            prop_assert_eq!(&project_key(p.view(), &g, l.view()).unwrap().0, &zero);
        }

        #[test]
        fn surplus_gives_full_coverage((_g, l, _p, _w, _o) in instance(), extra in 0.0f64..10.0) {
            let g: Vec<f64> = l.rows().into_iter().map(|r| r.sum() + extra).collect();
            prop_assert_eq!(default_pro_rata_key(&g, l.view()).unwrap().0, l);
        }

        #[test]
        fn projection_is_idempotent((g, l, p, _w, _o) in instance()) {
            let once = project_key(p.view(), &g, l.view()).unwrap();
            let twice = project_key(once.0.view(), &g, l.view()).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
