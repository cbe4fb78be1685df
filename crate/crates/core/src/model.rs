//! Shared data model: time grid, members, load and generation profiles,
//! storage and PV assets, and whole-scenario validation.
//!
//! Energies are kWh per period everywhere; no average-power quantities
//! appear in the model.

use std::collections::HashSet;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tariffs::TariffSchedule;

/// Default period length: repartition is settled on a 30-minute basis.
pub const DEFAULT_STEP_HOURS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub period_count: usize,
    pub step_hours: f64,
}

impl TimeGrid {
    pub fn new(period_count: usize, step_hours: f64) -> Result<Self> {
        if period_count == 0 {
            return Err(Error::Invalid("time grid needs at least one period".into()));
        }
        if !(step_hours > 0.0 && step_hours.is_finite()) {
            return Err(Error::Invalid(format!("step must be positive, got {step_hours} h")));
        }
        Ok(Self { period_count, step_hours })
    }

    pub fn half_hourly(period_count: usize) -> Result<Self> {
        Self::new(period_count, DEFAULT_STEP_HOURS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemberCategory {
    NaturalPerson,
    Sme,
    MediumLargeEnterprise,
    LocalAuthority,
    EnergyCompany,
}

impl MemberCategory {
    pub const ALL: [MemberCategory; 5] = [
        MemberCategory::NaturalPerson,
        MemberCategory::Sme,
        MemberCategory::MediumLargeEnterprise,
        MemberCategory::LocalAuthority,
        MemberCategory::EnergyCompany,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MemberCategory::NaturalPerson => "natural-person",
            MemberCategory::Sme => "sme",
            MemberCategory::MediumLargeEnterprise => "medium-large-enterprise",
            MemberCategory::LocalAuthority => "local-authority",
            MemberCategory::EnergyCompany => "energy-company",
        }
    }
}

impl fmt::Display for MemberCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MemberCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        MemberCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| Error::Invalid(format!("unknown member category '{s}'")))
    }
}

/// Geographic position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub id: String,
    pub category: MemberCategory,
    pub voting_share: f64,
    pub location: Option<GeoPoint>,
    pub admin_region: Option<String>,
    /// Node of the feeder graph the member is connected to.
    pub connection_point: Option<String>,
    pub vulnerable: bool,
}

impl Member {
    pub fn new(id: impl Into<String>, category: MemberCategory, voting_share: f64) -> Self {
        Self {
            id: id.into(),
            category,
            voting_share,
            location: None,
            admin_region: None,
            connection_point: None,
            vulnerable: false,
        }
    }
}

/// Member load, `T x N`, kWh per period.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadMatrix(pub Array2<f64>);

impl LoadMatrix {
    pub fn periods(&self) -> usize {
        self.0.nrows()
    }

    pub fn members(&self) -> usize {
        self.0.ncols()
    }

    /// Aggregate community load per period.
    pub fn aggregate(&self) -> Vec<f64> {
        self.0.rows().into_iter().map(|r| r.sum()).collect()
    }
}

/// Local generation available for sharing, kWh per period.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationProfile(pub Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageSpec {
    pub capacity_kwh: f64,
    pub power_kw: f64,
    pub charge_efficiency: f64,
    pub discharge_efficiency: f64,
    pub initial_soc_kwh: f64,
}

impl StorageSpec {
    pub fn none() -> Self {
        Self {
            capacity_kwh: 0.0,
            power_kw: 0.0,
            charge_efficiency: 1.0,
            discharge_efficiency: 1.0,
            initial_soc_kwh: 0.0,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.capacity_kwh >= 0.0) {
            out.push(format!("storage capacity {} kWh < 0", self.capacity_kwh));
        }
        if !(self.power_kw >= 0.0) {
            out.push(format!("storage power {} kW < 0", self.power_kw));
        }
        for (name, eta) in [
            ("charge", self.charge_efficiency),
            ("discharge", self.discharge_efficiency),
        ] {
            if !(eta > 0.0 && eta <= 1.0) {
                out.push(format!("{name} efficiency {eta} outside (0, 1]"));
            }
        }
        if !(self.initial_soc_kwh >= 0.0 && self.initial_soc_kwh <= self.capacity_kwh) {
            out.push(format!(
                "initial state of charge {} kWh outside [0, {}]",
                self.initial_soc_kwh, self.capacity_kwh
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvSpec {
    pub peak_kw: f64,
    /// kWh per kW peak per period.
    pub normalized_profile: Vec<f64>,
}

impl PvSpec {
    pub fn production(&self) -> Vec<f64> {
        self.normalized_profile.iter().map(|v| v * self.peak_kw).collect()
    }
}

#[derive(Debug, Clone)]
pub struct CommunityScenario {
    pub grid: TimeGrid,
    pub members: Vec<Member>,
    pub load: LoadMatrix,
    pub pv: PvSpec,
    pub storage: StorageSpec,
    pub tariff: TariffSchedule,
    /// Lets the battery charge from the grid as well as from local PV.
    pub allow_grid_charging: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

const SHARE_TOL: f64 = 1e-9;

/// Collects every data problem in the scenario instead of stopping at the
/// first one.
pub fn validate_scenario(scenario: &CommunityScenario) -> ValidationReport {
    let mut v = Vec::new();
    let t = scenario.grid.period_count;
    let n = scenario.members.len();

    if t == 0 {
        v.push("time grid has no periods".to_string());
    }
    if !(scenario.grid.step_hours > 0.0) {
        v.push(format!("step {} h is not positive", scenario.grid.step_hours));
    }

    let load = &scenario.load.0;
    if load.nrows() != t {
        v.push(format!("load has {} rows, time grid has {t} periods", load.nrows()));
    }
    if load.ncols() != n {
        v.push(format!("load has {} columns, community has {n} members", load.ncols()));
    }
    for ((row, col), &x) in load.indexed_iter() {
        if !(x >= 0.0) || !x.is_finite() {
            v.push(format!("negative load at ({}, {})", row + 1, col + 1));
        }
    }

    let mut seen = HashSet::new();
    for m in &scenario.members {
        if !seen.insert(m.id.as_str()) {
            v.push(format!("duplicate member id '{}'", m.id));
        }
        if !(0.0..=1.0).contains(&m.voting_share) {
            v.push(format!("voting share {} of '{}' outside [0, 1]", m.voting_share, m.id));
        }
    }
    if n > 0 {
        let total: f64 = scenario.members.iter().map(|m| m.voting_share).sum();
        if (total - 1.0).abs() > SHARE_TOL {
            v.push(format!("voting shares sum {total} ≠ 1"));
        }
    } else {
        v.push("community has no members".to_string());
    }

    let pv = &scenario.pv;
    if pv.normalized_profile.len() != t {
        v.push(format!(
            "PV profile has {} periods, time grid has {t}",
            pv.normalized_profile.len()
        ));
    }
    if !(pv.peak_kw >= 0.0) {
        v.push(format!("PV peak {} kW < 0", pv.peak_kw));
    }
    for (i, &x) in pv.normalized_profile.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) {
            v.push(format!("PV profile value {x} at period {} outside [0, 1]", i + 1));
        }
    }

    v.extend(scenario.storage.problems());

    let tariff = &scenario.tariff;
    if tariff.period_count() != t {
        v.push(format!(
            "tariff covers {} periods, time grid has {t}",
            tariff.period_count()
        ));
    } else if let Err(e) = tariff.check_convex() {
        v.push(e.to_string());
    }

    ValidationReport { violations: v }
}

fn step_ratio(coarse: f64, fine: f64) -> Option<usize> {
    let r = coarse / fine;
    let k = r.round();
    (k >= 1.0 && (r - k).abs() <= 1e-9 * k).then_some(k as usize)
}

/// Changes the period length of an energy series. Coarsening sums the
/// energy of each block; refining splits every period equally.
pub fn resample_profile(series: &[f64], source_step: f64, target_step: f64) -> Result<Vec<f64>> {
    let bad = || Error::ResampleRatio { source_step, target_step };
    if !(source_step > 0.0 && target_step > 0.0) {
        return Err(bad());
    }
    if target_step >= source_step {
        let k = step_ratio(target_step, source_step).ok_or_else(bad)?;
        if series.len() % k != 0 {
            return Err(Error::Dimension(format!(
                "series of {} periods does not divide into blocks of {k}",
                series.len()
            )));
        }
        Ok(series.chunks(k).map(|c| c.iter().sum()).collect())
    } else {
        let k = step_ratio(source_step, target_step).ok_or_else(bad)?;
        let part = 1.0 / k as f64;
        Ok(series
            .iter()
            .flat_map(|&x| std::iter::repeat_n(x * part, k))
            .collect())
    }
}
