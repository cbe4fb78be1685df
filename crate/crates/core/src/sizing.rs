//! PV and storage sizing by exhaustive enumeration of a discrete catalog,
//! with the dispatch LP as inner problem for each representative day.

use rayon::prelude::*;

use crate::dispatch::{solve_dispatch, DispatchProblem};
use crate::error::{Error, Result};
use crate::model::{CommunityScenario, StorageSpec};

/// Annuity factor turning an up-front cost into equal yearly payments.
pub fn capital_recovery_factor(rate: f64, years: u32) -> f64 {
    let years = years.max(1);
    if rate == 0.0 {
        return 1.0 / years as f64;
    }
    let growth = (1.0 + rate).powi(years as i32);
    rate * growth / (growth - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvOption {
    pub peak_kw: f64,
    pub capex: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageOption {
    pub capacity_kwh: f64,
    pub power_kw: f64,
    pub capex: f64,
}

/// One representative day: aggregate load and normalized PV profile over
/// the scenario's tariff periods, weighted in days per year.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeDay {
    pub aggregate_load: Vec<f64>,
    pub pv_profile: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizingCatalog {
    pub pv_options: Vec<PvOption>,
    pub storage_options: Vec<StorageOption>,
    pub discount_rate: f64,
    pub lifetime_years: u32,
    pub days: Vec<RepresentativeDay>,
}

impl SizingCatalog {
    fn validate(&self, periods: usize) -> Result<()> {
        if self.pv_options.is_empty() || self.storage_options.is_empty() {
            return Err(Error::Catalog("PV and storage option lists must be non-empty".into()));
        }
        if !(self.discount_rate >= 0.0) {
            return Err(Error::Catalog(format!("discount rate {} < 0", self.discount_rate)));
        }
        if self.lifetime_years < 1 {
            return Err(Error::Catalog("lifetime must be at least one year".into()));
        }
        if self.days.is_empty() {
            return Err(Error::Catalog("no representative days".into()));
        }
        let weights: f64 = self.days.iter().map(|d| d.weight).sum();
        if (weights - 365.0).abs() > 1.0 {
            return Err(Error::Catalog(format!("day weights sum to {weights}, expected 365 ± 1")));
        }
        for (i, d) in self.days.iter().enumerate() {
            if d.aggregate_load.len() != periods || d.pv_profile.len() != periods {
                return Err(Error::Catalog(format!(
                    "day {} has {} load and {} PV periods, tariff has {periods}",
                    i + 1,
                    d.aggregate_load.len(),
                    d.pv_profile.len()
                )));
            }
            if d.pv_profile.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Catalog(format!("day {} PV profile outside [0, 1]", i + 1)));
            }
            if !(d.weight >= 0.0) {
                return Err(Error::Catalog(format!("day {} has negative weight", i + 1)));
            }
        }
        for o in &self.pv_options {
            if !(o.peak_kw >= 0.0 && o.capex >= 0.0) {
                return Err(Error::Catalog(format!("invalid PV option {o:?}")));
            }
        }
        for o in &self.storage_options {
            if !(o.capacity_kwh >= 0.0 && o.power_kw >= 0.0 && o.capex >= 0.0) {
                return Err(Error::Catalog(format!("invalid storage option {o:?}")));
            }
        }
        Ok(())
    }
}

/// One evaluated row. The business-as-usual baseline has no option
/// indices and is never selected.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub pv: Option<usize>,
    pub storage: Option<usize>,
    pub peak_kw: f64,
    pub capacity_kwh: f64,
    pub power_kw: f64,
    pub capex: f64,
    pub annualized_capex: f64,
    pub annual_operation_cost: f64,
    pub total: f64,
}

impl Candidate {
    pub fn is_baseline(&self) -> bool {
        self.pv.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizingResult {
    /// Index into `table` of the chosen candidate.
    pub chosen: usize,
    pub pv: PvOption,
    pub storage: StorageOption,
    pub annualized_capex: f64,
    pub annual_operation_cost: f64,
    pub total: f64,
    /// Baseline first, then every pair with PV options varying slowest.
    pub table: Vec<Candidate>,
}

impl SizingResult {
    pub fn baseline(&self) -> &Candidate {
        &self.table[0]
    }
}

fn evaluate(
    scenario: &CommunityScenario,
    catalog: &SizingCatalog,
    crf: f64,
    pv: Option<usize>,
    storage: Option<usize>,
) -> Result<Candidate> {
    let pv_opt = pv.map_or(PvOption { peak_kw: 0.0, capex: 0.0 }, |i| catalog.pv_options[i]);
    let st_opt = storage.map_or(
        StorageOption { capacity_kwh: 0.0, power_kw: 0.0, capex: 0.0 },
        |i| catalog.storage_options[i],
    );
    let spec = StorageSpec {
        capacity_kwh: st_opt.capacity_kwh,
        power_kw: st_opt.power_kw,
        charge_efficiency: scenario.storage.charge_efficiency,
        discharge_efficiency: scenario.storage.discharge_efficiency,
        initial_soc_kwh: 0.0,
    };
    let mut operation = 0.0;
    for (day_index, day) in catalog.days.iter().enumerate() {
        let production: Vec<f64> = day.pv_profile.iter().map(|v| v * pv_opt.peak_kw).collect();
        let mut problem = DispatchProblem::new(
            production,
            day.aggregate_load.clone(),
            spec,
            scenario.tariff.clone(),
            scenario.grid.step_hours,
        );
        problem.allow_grid_charging = scenario.allow_grid_charging;
        let result = solve_dispatch(&problem).map_err(|e| Error::Candidate {
            pv: pv.map_or(0, |i| i + 1),
            storage: storage.map_or(0, |i| i + 1),
            day: day_index + 1,
            source: Box::new(e),
        })?;
        operation += day.weight * result.objective_cost;
    }
    let capex = pv_opt.capex + st_opt.capex;
    let annualized_capex = capex * crf;
    Ok(Candidate {
        pv,
        storage,
        peak_kw: pv_opt.peak_kw,
        capacity_kwh: st_opt.capacity_kwh,
        power_kw: st_opt.power_kw,
        capex,
        annualized_capex,
        annual_operation_cost: operation,
        total: annualized_capex + operation,
    })
}

/// Evaluates every (PV, storage) pair plus the no-asset baseline and picks
/// the cheapest pair per year. Ties go to the smaller capex, then the
/// smaller PV peak. With `parallel` set, candidates are evaluated on the
/// rayon pool; the table is identical either way.
pub fn optimize_sizing(
    scenario: &CommunityScenario,
    catalog: &SizingCatalog,
    parallel: bool,
) -> Result<SizingResult> {
    catalog.validate(scenario.tariff.period_count())?;
    let crf = capital_recovery_factor(catalog.discount_rate, catalog.lifetime_years);

    let mut pairs: Vec<(Option<usize>, Option<usize>)> = vec![(None, None)];
    for p in 0..catalog.pv_options.len() {
        for s in 0..catalog.storage_options.len() {
            pairs.push((Some(p), Some(s)));
        }
    }
    let table: Vec<Candidate> = if parallel {
        pairs
            .par_iter()
            .map(|&(p, s)| evaluate(scenario, catalog, crf, p, s))
            .collect::<Result<_>>()?
    } else {
        pairs
            .iter()
            .map(|&(p, s)| evaluate(scenario, catalog, crf, p, s))
            .collect::<Result<_>>()?
    };

    let chosen = (1..table.len())
        .min_by(|&a, &b| {
            let (x, y) = (&table[a], &table[b]);
            x.total
                .total_cmp(&y.total)
                .then(x.capex.total_cmp(&y.capex))
                .then(x.peak_kw.total_cmp(&y.peak_kw))
                .then(a.cmp(&b))
        })
        .expect("catalog has at least one pair");
    let c = &table[chosen];
    Ok(SizingResult {
        chosen,
        pv: catalog.pv_options[c.pv.unwrap()],
        storage: catalog.storage_options[c.storage.unwrap()],
        annualized_capex: c.annualized_capex,
        annual_operation_cost: c.annual_operation_cost,
        total: c.total,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LoadMatrix, Member, MemberCategory, PvSpec, TimeGrid};
    use crate::tariffs::{TariffBand, TariffSchedule};
    use ndarray::Array2;

    #[test]
    fn crf_limits() {
        assert!((capital_recovery_factor(0.0, 25) - 0.04).abs() < 1e-15);
        assert_eq!(capital_recovery_factor(0.0, 1), 1.0);
        // 0.05 * 1.05^25 / (1.05^25 - 1) at 50 significant digits
        assert!((capital_recovery_factor(0.05, 25) - 0.070_952_457_299_229_63).abs() < 1e-15);
        // single year at rate r: repay principal plus one year of interest
        assert!((capital_recovery_factor(0.07, 1) - 1.07).abs() < 1e-12);
    }

    fn scenario(periods: usize) -> CommunityScenario {
        CommunityScenario {
            grid: TimeGrid::new(periods, 1.0).unwrap(),
            members: vec![Member::new("a", MemberCategory::NaturalPerson, 1.0)],
            load: LoadMatrix(Array2::zeros((periods, 1))),
            pv: PvSpec { peak_kw: 0.0, normalized_profile: vec![0.0; periods] },
            storage: StorageSpec { charge_efficiency: 0.95, discharge_efficiency: 0.95, ..StorageSpec::none() },
            tariff: TariffSchedule::uniform(periods, TariffBand::flat("flat", vec![], 2.0, 5.0, 10.0, 3.0), 0.0)
                .unwrap(),
            allow_grid_charging: false,
        }
    }

    fn day(weight: f64) -> RepresentativeDay {
        RepresentativeDay {
            aggregate_load: vec![2.0, 3.0, 4.0, 2.0],
            pv_profile: vec![0.0, 0.6, 0.9, 0.1],
            weight,
        }
    }

    #[test]
    fn singleton_catalog() {
        let catalog = SizingCatalog {
            pv_options: vec![PvOption { peak_kw: 3.0, capex: 3000.0 }],
            storage_options: vec![StorageOption { capacity_kwh: 2.0, power_kw: 1.0, capex: 800.0 }],
            discount_rate: 0.03,
            lifetime_years: 20,
            days: vec![day(365.0)],
        };
        let r = optimize_sizing(&scenario(4), &catalog, false).unwrap();
        assert_eq!(r.table.len(), 2);
        assert_eq!(r.chosen, 1);
        assert!(r.baseline().is_baseline());
        assert_eq!(r.total, r.table[1].total);
        assert!((r.total - (r.annualized_capex + r.annual_operation_cost)).abs() < 1e-6);
    }

    #[test]
    fn free_larger_pv_wins() {
        let catalog = SizingCatalog {
            pv_options: vec![
                PvOption { peak_kw: 1.0, capex: 0.0 },
                PvOption { peak_kw: 4.0, capex: 0.0 },
                PvOption { peak_kw: 2.0, capex: 0.0 },
            ],
            storage_options: vec![StorageOption { capacity_kwh: 0.0, power_kw: 0.0, capex: 0.0 }],
            discount_rate: 0.05,
            lifetime_years: 25,
            days: vec![day(200.0), day(165.0)],
        };
        let r = optimize_sizing(&scenario(4), &catalog, false).unwrap();
        assert_eq!(r.pv.peak_kw, 4.0);
    }

    #[test]
    fn dominated_candidate_changes_nothing() {
        let mut catalog = SizingCatalog {
            pv_options: vec![PvOption { peak_kw: 2.0, capex: 1500.0 }, PvOption { peak_kw: 4.0, capex: 2600.0 }],
            storage_options: vec![
                StorageOption { capacity_kwh: 0.0, power_kw: 0.0, capex: 0.0 },
                StorageOption { capacity_kwh: 4.0, power_kw: 2.0, capex: 1200.0 },
            ],
            discount_rate: 0.04,
            lifetime_years: 20,
            days: vec![day(365.0)],
        };
        let before = optimize_sizing(&scenario(4), &catalog, false).unwrap();
        let mut worse = before.pv;
        worse.capex += 500.0;
        catalog.pv_options.push(worse);
        let after = optimize_sizing(&scenario(4), &catalog, false).unwrap();
        assert_eq!((before.pv, before.storage), (after.pv, after.storage));
    }

    #[test]
    fn parallel_matches_sequential() {
        let catalog = SizingCatalog {
            pv_options: vec![PvOption { peak_kw: 2.0, capex: 1500.0 }, PvOption { peak_kw: 5.0, capex: 3500.0 }],
            storage_options: vec![
                StorageOption { capacity_kwh: 0.0, power_kw: 0.0, capex: 0.0 },
                StorageOption { capacity_kwh: 3.0, power_kw: 1.5, capex: 900.0 },
            ],
            discount_rate: 0.04,
            lifetime_years: 20,
            days: vec![day(180.0), day(185.0)],
        };
        let a = optimize_sizing(&scenario(4), &catalog, false).unwrap();
        let b = optimize_sizing(&scenario(4), &catalog, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn catalog_errors() {
        let mut catalog = SizingCatalog {
            pv_options: vec![],
            storage_options: vec![StorageOption { capacity_kwh: 0.0, power_kw: 0.0, capex: 0.0 }],
            discount_rate: 0.04,
            lifetime_years: 20,
            days: vec![day(365.0)],
        };
        assert!(matches!(optimize_sizing(&scenario(4), &catalog, false), Err(Error::Catalog(_))));
        catalog.pv_options.push(PvOption { peak_kw: 1.0, capex: 1.0 });
        catalog.days[0].weight = 300.0;
        assert!(matches!(optimize_sizing(&scenario(4), &catalog, false), Err(Error::Catalog(_))));
    }
}
