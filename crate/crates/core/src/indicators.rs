//! Community-versus-business-as-usual indicators and the weighted
//! multi-objective score.
//!
//! Local generation is treated as zero-emission and the grid emission
//! factor is a single flat value. The social term counts bill savings of
//! members flagged as vulnerable.

use ndarray::ArrayView2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Member;
use crate::tariffs::{business_as_usual_bills, Bill, TariffSchedule};

/// Share of community load covered by allocated local energy.
pub fn renewable_share(load: ArrayView2<f64>, key: ArrayView2<f64>) -> f64 {
    let total = load.sum();
    if total <= 0.0 {
        return 0.0;
    }
    (key.sum() / total).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StakeholderDeltas {
    /// Change in network-fee revenue of the system operator, €.
    pub dso: f64,
    /// Change in energy sales of incumbent suppliers, €.
    pub supplier: f64,
}

/// Revenue shifts caused by sharing: each allocated kWh pays the local
/// network fee instead of the grid one and is no longer sold by a supplier.
pub fn stakeholder_deltas(key: ArrayView2<f64>, schedule: &TariffSchedule) -> Result<StakeholderDeltas> {
    if key.nrows() != schedule.period_count() {
        return Err(Error::Dimension(format!(
            "key has {} periods, tariff has {}",
            key.nrows(),
            schedule.period_count()
        )));
    }
    let (mut dso, mut supplier) = (0.0, 0.0);
    for (t, row) in key.rows().into_iter().enumerate() {
        let band = schedule.band(t)?;
        let shared = row.sum();
        dso += shared * (band.auto_network - band.allo_network);
        supplier -= shared * band.supplier_energy;
    }
    Ok(StakeholderDeltas { dso: dso / 100.0, supplier: supplier / 100.0 })
}

/// Monetized avoided emissions, €. `factor` in kgCO2/kWh, `scc` in €/tCO2.
pub fn emissions_value(key: ArrayView2<f64>, factor: f64, scc: f64) -> f64 {
    key.sum() * factor / 1000.0 * scc
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ScoreWeights {
    pub economic: f64,
    pub environmental: f64,
    pub social: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndicatorFactors {
    /// kgCO2 per kWh of grid electricity.
    pub grid_emission_factor: f64,
    /// € per tCO2.
    pub social_cost_of_carbon: f64,
    pub weights: ScoreWeights,
}

/// A figure with and without the community.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub community: f64,
    pub business_as_usual: f64,
    pub delta: f64,
}

impl Comparison {
    pub fn new(community: f64, business_as_usual: f64) -> Self {
        Self { community, business_as_usual, delta: community - business_as_usual }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactReport {
    /// Net community energy cost, €: member bills minus export revenue plus
    /// grid-charging purchases.
    pub total_energy_cost: Comparison,
    pub renewable_share: f64,
    pub dso_revenue: Comparison,
    pub supplier_revenue: Comparison,
    /// tCO2 from grid imports.
    pub emissions_t: Comparison,
    /// Avoided emissions valued at the social cost of carbon, €.
    pub emissions_value: f64,
    /// Bill savings of vulnerable-flagged members, €.
    pub vulnerable_savings: f64,
    pub weighted_score: f64,
}

/// Inputs of [`build_impact_report`] that describe the operated community.
pub struct CommunityOutcome<'a> {
    pub load: ArrayView2<'a, f64>,
    pub key: ArrayView2<'a, f64>,
    pub bill: &'a Bill,
    /// Energy the battery drew from the grid per period.
    pub grid_charge: &'a [f64],
}

pub fn build_impact_report(
    outcome: &CommunityOutcome<'_>,
    members: &[Member],
    schedule: &TariffSchedule,
    factors: &IndicatorFactors,
) -> Result<ImpactReport> {
    let load = outcome.load;
    if members.len() != load.ncols() || outcome.bill.members.len() != load.ncols() {
        return Err(Error::Dimension(format!(
            "{} members, {} bills, {} load columns",
            members.len(),
            outcome.bill.members.len(),
            load.ncols()
        )));
    }
    if outcome.grid_charge.len() != load.nrows() {
        return Err(Error::Dimension("grid charge length differs from load".into()));
    }
    let bau = business_as_usual_bills(load, schedule)?;
    let grid_charge_cost: f64 = outcome
        .grid_charge
        .iter()
        .enumerate()
        .map(|(t, k)| k * schedule.allo_cost(t))
        .sum::<f64>()
        / 100.0;

    let ec_cost = outcome.bill.members_total().euros() - outcome.bill.export_revenue.euros() + grid_charge_cost;
    let total_energy_cost = Comparison::new(ec_cost, bau.members_total().euros());
    let dso_revenue = Comparison::new(outcome.bill.network_total().euros(), bau.network_total().euros());
    let supplier_revenue = Comparison::new(outcome.bill.supplier_total().euros(), bau.supplier_total().euros());

    let factor = factors.grid_emission_factor;
    let imported = load.sum() - outcome.key.sum() + outcome.grid_charge.iter().sum::<f64>();
    let emissions_t = Comparison::new(imported * factor / 1000.0, load.sum() * factor / 1000.0);
    let avoided = emissions_value(outcome.key, factor, factors.social_cost_of_carbon);

    let vulnerable_savings: f64 = members
        .iter()
        .zip(outcome.bill.members.iter().zip(&bau.members))
        .filter(|(m, _)| m.vulnerable)
        .map(|(_, (ec, bau))| bau.total.euros() - ec.total.euros())
        .sum();

    let mut report = ImpactReport {
        total_energy_cost,
        renewable_share: renewable_share(load, outcome.key),
        dso_revenue,
        supplier_revenue,
        emissions_t,
        emissions_value: avoided,
        vulnerable_savings,
        weighted_score: 0.0,
    };
    report.weighted_score = community_score(&report, &factors.weights);
    Ok(report)
}

/// Weighted sum of economic savings, avoided-emission value and vulnerable
/// member savings; higher is better.
pub fn community_score(report: &ImpactReport, weights: &ScoreWeights) -> f64 {
    let savings = report.total_energy_cost.business_as_usual - report.total_energy_cost.community;
    weights.economic * savings
        + weights.environmental * report.emissions_value
        + weights.social * report.vulnerable_savings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{default_pro_rata_key, residual_load};
    use crate::model::MemberCategory;
    use crate::tariffs::{compute_bills, TariffBand};
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn flat(t: usize, auto: f64, allo: f64, supplier: f64) -> TariffSchedule {
        TariffSchedule::uniform(t, TariffBand::flat("flat", vec![], auto, allo, supplier, 0.0), 0.0).unwrap()
    }

    #[test]
    fn renewable_share_examples() {
        let l = array![[4.0, 6.0]];
        assert!((renewable_share(l.view(), array![[1.0, 3.0]].view()) - 0.4).abs() < 1e-15);
        assert_eq!(renewable_share(l.view(), l.view()), 1.0);
        assert_eq!(renewable_share(l.view(), Array2::zeros((1, 2)).view()), 0.0);
        assert_eq!(renewable_share(Array2::zeros((1, 2)).view(), Array2::zeros((1, 2)).view()), 0.0);
    }

    #[test]
    fn stakeholder_examples() {
        let key = array![[1.0, 3.0]];
        let d = stakeholder_deltas(key.view(), &flat(1, 2.0, 5.0, 10.0)).unwrap();
        assert!((d.dso + 0.12).abs() < 1e-12);
        assert!((d.supplier + 0.40).abs() < 1e-12);
        let zero = stakeholder_deltas(Array2::zeros((1, 2)).view(), &flat(1, 2.0, 5.0, 10.0)).unwrap();
        assert_eq!((zero.dso, zero.supplier), (0.0, 0.0));
    }

    #[test]
    fn emissions_examples() {
        let key = array![[400.0, 600.0]];
        assert!((emissions_value(key.view(), 0.2, 100.0) - 20.0).abs() < 1e-12);
        assert_eq!(emissions_value(key.view(), 0.2, 0.0), 0.0);
        assert_eq!(emissions_value(Array2::zeros((1, 2)).view(), 0.2, 100.0), 0.0);
    }

    fn report_with(savings: f64, avoided: f64, vulnerable: f64) -> ImpactReport {
        ImpactReport {
            total_energy_cost: Comparison::new(100.0 - savings, 100.0),
            renewable_share: 0.3,
            dso_revenue: Comparison::new(0.0, 0.0),
            supplier_revenue: Comparison::new(0.0, 0.0),
            emissions_t: Comparison::new(0.0, 0.0),
            emissions_value: avoided,
            vulnerable_savings: vulnerable,
            weighted_score: 0.0,
        }
    }

    #[test]
    fn score_examples() {
        let r = report_with(50.0, 7.0, 0.0);
        assert_eq!(community_score(&r, &ScoreWeights::default()), 0.0);
        let econ = ScoreWeights { economic: 1.0, ..Default::default() };
        assert!((community_score(&r, &econ) - 50.0).abs() < 1e-12);
        let soc = ScoreWeights { social: 3.0, ..Default::default() };
        assert_eq!(community_score(&r, &soc), 0.0);
    }

    proptest! {
        #[test]
        fn score_is_linear_in_weights(
            s in -50.0f64..50.0, a in 0.0f64..20.0, v in 0.0f64..10.0,
            w1 in prop::array::uniform3(0.0f64..5.0), w2 in prop::array::uniform3(0.0f64..5.0),
            k in 0.0f64..3.0,
        ) {
            let r = report_with(s, a, v);
            let mk = |w: [f64; 3]| ScoreWeights { economic: w[0], environmental: w[1], social: w[2] };
            let sum = [w1[0] + k * w2[0], w1[1] + k * w2[1], w1[2] + k * w2[2]];
            let lhs = community_score(&r, &mk(sum));
            let rhs = community_score(&r, &mk(w1)) + k * community_score(&r, &mk(w2));
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn report_is_consistent_with_bills() {
        let l = array![[2.0, 1.0], [1.0, 3.0], [0.5, 0.5]];
        let g = [1.5, 5.0, 0.0];
        let key = default_pro_rata_key(&g, l.view()).unwrap();
        let r = residual_load(l.view(), key.0.view()).unwrap();
        let export = [0.0, 1.0, 0.0];
        let sched = flat(3, 2.0, 5.0, 10.0);
        let bill = compute_bills(l.view(), key.0.view(), r.view(), &export, &sched).unwrap();
        let mut members = vec![
            Member::new("a", MemberCategory::NaturalPerson, 0.5),
            Member::new("b", MemberCategory::Sme, 0.5),
        ];
        members[0].vulnerable = true;
        let factors = IndicatorFactors {
            grid_emission_factor: 0.25,
            social_cost_of_carbon: 80.0,
            weights: ScoreWeights { economic: 1.0, environmental: 1.0, social: 1.0 },
        };
        let outcome = CommunityOutcome { load: l.view(), key: key.0.view(), bill: &bill, grid_charge: &[0.0; 3] };
        let rep = build_impact_report(&outcome, &members, &sched, &factors).unwrap();
        let d = stakeholder_deltas(key.0.view(), &sched).unwrap();
        assert!((rep.dso_revenue.delta - d.dso).abs() < 1e-9);
        assert!((rep.supplier_revenue.delta - d.supplier).abs() < 1e-9);
        assert!((rep.renewable_share - key.total() / l.sum()).abs() < 1e-15);
        // Member a receives 1.0 + 1.0 kWh, each saving (10 + 5) - 2 c€.
        assert!((rep.vulnerable_savings - 2.0 * 13.0 / 100.0).abs() < 1e-12);
        assert!((rep.emissions_t.delta * 80.0 + rep.emissions_value).abs() < 1e-12);
    }
}
