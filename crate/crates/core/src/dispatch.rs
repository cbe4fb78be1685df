//! Storage dispatch that minimizes the community's energy bill.
//!
//! Per period `t` the LP has PV-charge `c_t`, optional grid-charge `k_t`,
//! discharge `d_t`, end-of-period state of charge `s_t`, locally consumed
//! generation `u_t` and export `x_t`:
//!
//! ```text
//! min  sum_t (auto_t - allo_t) u_t - export_t x_t + allo_t k_t
//! s.t. s_t = s_{t-1} + eta_c (c_t + k_t) - d_t / eta_d
//!      p_t - c_t + d_t = u_t + x_t
//!      0 <= c_t <= min(p_t, P dt),  0 <= d_t <= P dt,  c_t + k_t <= P dt
//!      0 <= s_t <= E,  0 <= u_t <= L_t,  x_t >= 0
//! ```
//!
//! Splitting `g_t = u_t + x_t` is exact as long as exporting never pays more
//! than sharing saves, which [`TariffSchedule::check_convex`] enforces. Ties
//! are broken by minimizing total battery throughput.

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpError, Relation};
use crate::model::StorageSpec;
use crate::tariffs::TariffSchedule;

#[derive(Debug, Clone)]
pub struct DispatchProblem {
    /// PV production, kWh per period.
    pub pv: Vec<f64>,
    /// Community load per period, kWh.
    pub aggregate_load: Vec<f64>,
    pub storage: StorageSpec,
    pub schedule: TariffSchedule,
    pub step_hours: f64,
    pub allow_grid_charging: bool,
}

impl DispatchProblem {
    pub fn new(
        pv: Vec<f64>,
        aggregate_load: Vec<f64>,
        storage: StorageSpec,
        schedule: TariffSchedule,
        step_hours: f64,
    ) -> Self {
        Self { pv, aggregate_load, storage, schedule, step_hours, allow_grid_charging: false }
    }

    pub fn periods(&self) -> usize {
        self.pv.len()
    }

    fn max_step_energy(&self) -> f64 {
        self.storage.power_kw * self.step_hours
    }

    fn validate(&self) -> Result<()> {
        let t = self.pv.len();
        if t == 0 {
            return Err(Error::Invalid("dispatch needs at least one period".into()));
        }
        if self.aggregate_load.len() != t || self.schedule.period_count() != t {
            return Err(Error::Dimension(format!(
                "{t} PV periods, {} load periods, {} tariff periods",
                self.aggregate_load.len(),
                self.schedule.period_count()
            )));
        }
        if let Some(v) = self.pv.iter().chain(&self.aggregate_load).find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Invalid(format!("negative or non-finite energy {v}")));
        }
        if !(self.step_hours > 0.0) {
            return Err(Error::Invalid(format!("step {} h is not positive", self.step_hours)));
        }
        let problems = self.storage.problems();
        if !problems.is_empty() {
            return Err(Error::Storage(problems.join("; ")));
        }
        self.schedule.check_convex()
    }

    /// Bill of the community (c€) for a given shared-generation profile
    /// and grid-charged energy.
    pub fn cost_cents(&self, shared: &[f64], grid_charge: &[f64]) -> f64 {
        (0..self.periods())
            .map(|t| {
                let (g, l) = (shared[t], self.aggregate_load[t]);
                let allo = self.schedule.allo_cost(t);
                allo * (l - g).max(0.0) + self.schedule.auto_cost(t) * g.min(l)
                    - self.schedule.export_price(t) * (g - l).max(0.0)
                    + allo * grid_charge[t]
            })
            .sum()
    }

    /// Cost without any community assets: all load bought from the grid.
    pub fn business_as_usual_cost(&self) -> f64 {
        (0..self.periods())
            .map(|t| self.schedule.allo_cost(t) * self.aggregate_load[t])
            .sum::<f64>()
            / 100.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    /// Total charge per period (PV plus grid).
    pub charge: Vec<f64>,
    /// Part of `charge` drawn from the grid; zero unless grid charging is
    /// allowed.
    pub grid_charge: Vec<f64>,
    pub discharge: Vec<f64>,
    /// State of charge at the end of each period.
    pub soc: Vec<f64>,
    /// Local generation available for sharing, `p - c + d`.
    pub shared: Vec<f64>,
    pub export: Vec<f64>,
    /// €.
    pub objective_cost: f64,
}

impl DispatchResult {
    pub fn pv_charge(&self, t: usize) -> f64 {
        self.charge[t] - self.grid_charge[t]
    }

    /// Locally consumed generation, `min(g_t, L_t)`.
    pub fn allocated(&self, aggregate_load: &[f64]) -> Vec<f64> {
        self.shared.iter().zip(aggregate_load).map(|(g, l)| g.min(*l)).collect()
    }
}

struct Vars {
    c: usize,
    k: Option<usize>,
    d: usize,
    s: usize,
    u: usize,
    x: usize,
}

pub fn solve_dispatch(problem: &DispatchProblem) -> Result<DispatchResult> {
    problem.validate()?;
    let n = problem.periods();
    let st = &problem.storage;
    let step = problem.max_step_energy();
    let sched = &problem.schedule;

    let mut lp = LinearProgram::new();
    let vars: Vec<Vars> = (0..n)
        .map(|t| {
            let p = problem.pv[t];
            Vars {
                c: lp.add_var(0.0, p.min(step)),
                k: problem.allow_grid_charging.then(|| lp.add_var(0.0, step)),
                d: lp.add_var(0.0, step),
                s: lp.add_var(0.0, st.capacity_kwh),
                u: lp.add_var(0.0, problem.aggregate_load[t]),
                x: lp.add_var(0.0, p + step),
            }
        })
        .collect();

    for (t, v) in vars.iter().enumerate() {
        let mut terms = vec![
            (v.s, 1.0),
            (v.c, -st.charge_efficiency),
            (v.d, 1.0 / st.discharge_efficiency),
        ];
        if let Some(k) = v.k {
            terms.push((k, -st.charge_efficiency));
        }
        let rhs = if t == 0 {
            st.initial_soc_kwh
        } else {
            terms.push((vars[t - 1].s, -1.0));
            0.0
        };
        lp.add_constraint(terms, Relation::Eq, rhs);
        lp.add_constraint(
            vec![(v.c, 1.0), (v.d, -1.0), (v.u, 1.0), (v.x, 1.0)],
            Relation::Eq,
            problem.pv[t],
        );
        if let Some(k) = v.k {
            lp.add_constraint(vec![(v.c, 1.0), (k, 1.0)], Relation::Le, step);
        }
    }

    let mut cost = vec![0.0; lp.num_vars()];
    let mut throughput = vec![0.0; lp.num_vars()];
    for (t, v) in vars.iter().enumerate() {
        cost[v.u] = sched.auto_cost(t) - sched.allo_cost(t);
        cost[v.x] = -sched.export_price(t);
        throughput[v.c] = 1.0;
        throughput[v.d] = 1.0;
        if let Some(k) = v.k {
            cost[k] = sched.allo_cost(t);
            throughput[k] = 1.0;
        }
    }

    let sol = lp.minimize_lexicographic(&[&cost, &throughput]).map_err(|e| match e {
        LpError::Unbounded => Error::UnboundedDispatch,
        other => Error::Lp(other),
    })?;

    let val = |j: usize| sol.x[j].max(0.0);
    let mut result = DispatchResult {
        charge: Vec::with_capacity(n),
        grid_charge: Vec::with_capacity(n),
        discharge: Vec::with_capacity(n),
        soc: Vec::with_capacity(n),
        shared: Vec::with_capacity(n),
        export: Vec::with_capacity(n),
        objective_cost: 0.0,
    };
    let mut soc = st.initial_soc_kwh;
    for (t, v) in vars.iter().enumerate() {
        let c = val(v.c).min(problem.pv[t]);
        let k = v.k.map_or(0.0, val);
        let d = val(v.d);
        soc += st.charge_efficiency * (c + k) - d / st.discharge_efficiency;
        soc = soc.clamp(0.0, st.capacity_kwh);
        let g = (problem.pv[t] - c + d).max(0.0);
        result.charge.push(c + k);
        result.grid_charge.push(k);
        result.discharge.push(d);
        result.soc.push(soc);
        result.shared.push(g);
        result.export.push((g - problem.aggregate_load[t]).max(0.0));
    }
    result.objective_cost = problem.cost_cents(&result.shared, &result.grid_charge) / 100.0;
    Ok(result)
}

/// Re-checks every invariant of a dispatch result and recomputes its
/// objective. Returns all violations found.
pub fn verify_dispatch(result: &DispatchResult, problem: &DispatchProblem, tol: f64) -> (bool, Vec<String>) {
    let mut v = Vec::new();
    let n = problem.periods();
    let lens = [
        result.charge.len(),
        result.grid_charge.len(),
        result.discharge.len(),
        result.soc.len(),
        result.shared.len(),
        result.export.len(),
    ];
    if lens.iter().any(|&l| l != n) || problem.aggregate_load.len() != n {
        v.push(format!("series lengths {lens:?} do not match {n} periods"));
        return (false, v);
    }
    let st = &problem.storage;
    let step = problem.max_step_energy();
    let mut prev = st.initial_soc_kwh;
    let (mut charged, mut discharged, mut grid_in) = (0.0, 0.0, 0.0);
    for t in 0..n {
        let (c, k, d, s) = (result.charge[t], result.grid_charge[t], result.discharge[t], result.soc[t]);
        let pv_c = c - k;
        let p = problem.pv[t];
        let l = problem.aggregate_load[t];
        let p1 = t + 1;
        if c < -tol || d < -tol || k < -tol || pv_c < -tol {
            v.push(format!("period {p1}: negative charge or discharge"));
        }
        if c.min(d) > tol {
            v.push(format!("period {p1}: simultaneous charge {c} and discharge {d}"));
        }
        if k > tol && !problem.allow_grid_charging {
            v.push(format!("period {p1}: grid charging {k} not allowed"));
        }
        if pv_c > p + tol {
            v.push(format!("period {p1}: PV charge {pv_c} exceeds production {p}"));
        }
        if c > step + tol || d > step + tol {
            v.push(format!("period {p1}: power limit {step} kWh exceeded"));
        }
        if s < -tol || s > st.capacity_kwh + tol {
            v.push(format!("period {p1}: state of charge {s} outside [0, {}]", st.capacity_kwh));
        }
        let expect = prev + st.charge_efficiency * c - d / st.discharge_efficiency;
        if (s - expect).abs() > tol {
            v.push(format!("period {p1}: state of charge {s} != {expect} from dynamics"));
        }
        prev = s;
        let g = result.shared[t];
        if g < -tol || (g - (p - pv_c + d)).abs() > tol {
            v.push(format!("period {p1}: shared generation {g} != p - c + d"));
        }
        if (result.export[t] - (g - l).max(0.0)).abs() > tol {
            v.push(format!("period {p1}: export {} != max(0, g - L)", result.export[t]));
        }
        charged += c;
        discharged += d;
        grid_in += k;
    }

    // p + grid charge = consumed + exported + stored + losses
    let produced: f64 = problem.pv.iter().sum::<f64>() + grid_in;
    let consumed: f64 = result.allocated(&problem.aggregate_load).iter().sum();
    let exported: f64 = result.export.iter().sum();
    let stored = prev - st.initial_soc_kwh;
    let losses = (1.0 - st.charge_efficiency) * charged + (1.0 / st.discharge_efficiency - 1.0) * discharged;
    let residue = produced - (consumed + exported + stored + losses);
    if residue.abs() > tol.max(1e-9) * (1.0 + produced) {
        v.push(format!("energy balance off by {residue} kWh"));
    }

    let cost = problem.cost_cents(&result.shared, &result.grid_charge) / 100.0;
    if (cost - result.objective_cost).abs() > tol {
        v.push(format!("objective {} != recomputed {cost}", result.objective_cost));
    }
    (v.is_empty(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tariffs::TariffBand;

    fn schedule(t: usize, auto: f64, allo: f64, export: f64) -> TariffSchedule {
        // Supplier price 0 so that allo_cost == allo network fee.
        TariffSchedule::uniform(t, TariffBand::flat("flat", vec![], auto, allo, 0.0, export), 0.0).unwrap()
    }

    fn storage(e: f64, p: f64, eta: f64, s0: f64) -> StorageSpec {
        StorageSpec {
            capacity_kwh: e,
            power_kw: p,
            charge_efficiency: eta,
            discharge_efficiency: eta,
            initial_soc_kwh: s0,
        }
    }

    #[test]
    fn no_storage_passes_pv_through() {
        let prob = DispatchProblem::new(
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 2.0],
            StorageSpec::none(),
            schedule(3, 2.0, 10.0, 1.0),
            0.5,
        );
        let r = solve_dispatch(&prob).unwrap();
        assert_eq!(r.charge, vec![0.0; 3]);
        assert_eq!(r.discharge, vec![0.0; 3]);
        assert_eq!(r.shared, prob.pv);
        // Static bill: 1*2 + 3*1 export, 1*2 + 2*10, 2*10
        let expect = (2.0 - 3.0 + 2.0 + 20.0 + 20.0) / 100.0;
        assert!((r.objective_cost - expect).abs() < 1e-12);
        assert!(verify_dispatch(&r, &prob, 1e-9).0);
    }

    /// Exhaustive search over the two free actions of the two-period
    /// example (charge in period 1, discharge in period 2) on a 0.01 kWh grid.
    fn two_period_brute_force() -> (f64, f64, f64) {
        let cost = |c1: f64, d2: f64| {
            let g = [4.0 - c1, d2];
            let l = [1.0, 3.0];
            (0..2)
                .map(|t| 10.0 * (l[t] - g[t]).max(0.0) + 2.0 * g[t].min(l[t]))
                .sum::<f64>()
                / 100.0
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=400 {
            let c1 = i as f64 * 0.01;
            for j in 0..=500 {
                let d2 = j as f64 * 0.01;
                if d2 > c1 + 1e-12 {
                    break;
                }
                let v = cost(c1, d2);
                if v < best.0 - 1e-12 || (v <= best.0 + 1e-12 && c1 + d2 < best.1 + best.2) {
                    best = (v, c1, d2);
                }
            }
        }
        best
    }

    #[test]
    fn two_period_shift_matches_brute_force() {
        let oracle = two_period_brute_force();
        assert!((oracle.0 - 0.08).abs() < 1e-12);
        assert!((oracle.1 - 3.0).abs() < 1e-9 && (oracle.2 - 3.0).abs() < 1e-9);

        let prob = DispatchProblem::new(
            vec![4.0, 0.0],
            vec![1.0, 3.0],
            storage(10.0, 5.0, 1.0, 0.0),
            schedule(2, 2.0, 10.0, 0.0),
            1.0,
        );
        let r = solve_dispatch(&prob).unwrap();
        for (a, b) in r.charge.iter().zip([3.0, 0.0]) {
            assert!((a - b).abs() < 1e-9, "{:?}", r.charge);
        }
        for (a, b) in r.discharge.iter().zip([0.0, 3.0]) {
            assert!((a - b).abs() < 1e-9, "{:?}", r.discharge);
        }
        assert!((r.objective_cost - (1.0 + 3.0) * 2.0 / 100.0).abs() < 1e-9);
        let (ok, v) = verify_dispatch(&r, &prob, 1e-9);
        assert!(ok, "{v:?}");
    }

    #[test]
    fn indifferent_costs_leave_battery_idle() {
        let prob = DispatchProblem::new(
            vec![4.0, 0.0, 2.0],
            vec![1.0, 3.0, 0.5],
            storage(10.0, 5.0, 1.0, 2.0),
            schedule(3, 6.0, 6.0, 0.0),
            1.0,
        );
        let r = solve_dispatch(&prob).unwrap();
        assert!(r.charge.iter().chain(&r.discharge).all(|v| v.abs() < 1e-12));
        assert_eq!(r.soc, vec![2.0; 3]);
    }

    #[test]
    fn zero_pv_is_business_as_usual() {
        let prob = DispatchProblem::new(
            vec![0.0; 4],
            vec![1.0, 3.0, 0.5, 2.0],
            storage(5.0, 3.0, 0.9, 0.0),
            schedule(4, 2.0, 9.0, 1.0),
            0.5,
        );
        let r = solve_dispatch(&prob).unwrap();
        assert!(r.shared.iter().chain(&r.export).all(|&v| v == 0.0));
        assert!((r.objective_cost - prob.business_as_usual_cost()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_storage_and_non_convex_tariffs() {
        let mut prob = DispatchProblem::new(
            vec![1.0],
            vec![1.0],
            storage(1.0, 1.0, 1.0, 2.0),
            schedule(1, 2.0, 9.0, 1.0),
            0.5,
        );
        assert!(matches!(solve_dispatch(&prob), Err(Error::Storage(_))));
        prob.storage.initial_soc_kwh = 0.0;
        prob.schedule = schedule(1, 2.0, 9.0, 8.0);
        assert!(matches!(solve_dispatch(&prob), Err(Error::NonConvexTariff { .. })));
    }

    #[test]
    fn grid_charging_used_only_when_allowed() {
        // Cheap night, expensive evening; no PV at all.
        let band_night = TariffBand::flat("night", vec![0], 0.0, 1.0, 1.0, 0.0);
        let band_peak = TariffBand::flat("peak", vec![1], 0.0, 10.0, 10.0, 0.0);
        let sched = TariffSchedule::new(2, vec![band_night, band_peak], 0.0).unwrap();
        let mut prob = DispatchProblem::new(vec![0.0; 2], vec![0.0, 4.0], storage(10.0, 5.0, 1.0, 0.0), sched, 1.0);
        let r = solve_dispatch(&prob).unwrap();
        assert_eq!(r.charge, vec![0.0, 0.0]);

        prob.allow_grid_charging = true;
        let r = solve_dispatch(&prob).unwrap();
        assert!((r.grid_charge[0] - 4.0).abs() < 1e-9);
        assert!((r.objective_cost - 0.08).abs() < 1e-9);
        let (ok, v) = verify_dispatch(&r, &prob, 1e-9);
        assert!(ok, "{v:?}");
    }

    #[test]
    fn verify_flags_tampering() {
        let prob = DispatchProblem::new(
            vec![4.0, 0.0],
            vec![1.0, 3.0],
            storage(10.0, 5.0, 1.0, 0.0),
            schedule(2, 2.0, 10.0, 0.0),
            1.0,
        );
        let r = solve_dispatch(&prob).unwrap();

        let mut bad = r.clone();
        bad.soc[0] = prob.storage.capacity_kwh + 1.0;
        let (ok, v) = verify_dispatch(&bad, &prob, 1e-6);
        assert!(!ok && v.iter().any(|m| m.contains("outside")));

        let mut bad = r.clone();
        bad.objective_cost += 0.01;
        let (ok, v) = verify_dispatch(&bad, &prob, 1e-6);
        assert!(!ok && v.iter().any(|m| m.contains("recomputed")));
    }

    #[test]
    fn cheaper_local_energy_never_costs_more() {
        let base = DispatchProblem::new(
            vec![3.0, 0.5, 2.0, 0.0],
            vec![1.0, 2.0, 1.0, 2.5],
            storage(4.0, 2.0, 0.95, 1.0),
            schedule(4, 4.0, 12.0, 2.0),
            1.0,
        );
        let mut cheaper = base.clone();
        cheaper.schedule = schedule(4, 3.0, 12.0, 2.0);
        let a = solve_dispatch(&base).unwrap().objective_cost;
        let b = solve_dispatch(&cheaper).unwrap().objective_cost;
        assert!(b <= a + 1e-9);
    }
}
