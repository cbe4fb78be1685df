//! Scenario configuration: a TOML file read as a flat map of dotted keys.
//!
//! Relative paths are resolved against the directory of the config file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ecplan_core::{
    CommunityType, GovernanceRules, IndicatorFactors, PvOption, ScoreWeights, StorageOption, StorageSpec, TariffBand,
    TariffSchedule,
};

const KNOWN_KEYS: &[&str] = &[
    "data.load",
    "data.pv",
    "data.members",
    "data.assets",
    "data.feeder",
    "pv.peak_kw",
    "storage.capacity_kwh",
    "storage.power_kw",
    "storage.charge_efficiency",
    "storage.discharge_efficiency",
    "storage.initial_soc_kwh",
    "dispatch.allow_grid_charging",
    "allocation.rule",
    "allocation.order",
    "allocation.weights",
    "allocation.key",
    "tariff.internal_price",
    "compliance.community_type",
    "compliance.method",
    "compliance.radius_km",
    "compliance.allowed_transformers",
    "compliance.control_threshold",
    "compliance.autonomy_threshold",
    "indicators.grid_emission_factor",
    "indicators.social_cost_of_carbon",
    "indicators.weight_economic",
    "indicators.weight_environmental",
    "indicators.weight_social",
    "sizing.pv_peak_kw",
    "sizing.pv_capex",
    "sizing.storage_capacity_kwh",
    "sizing.storage_power_kw",
    "sizing.storage_capex",
    "sizing.discount_rate",
    "sizing.lifetime_years",
    "sizing.days",
    "sizing.day_weight",
    "sizing.parallel",
    "investment.pool",
    "investment.project_name",
    "investment.peak_kw",
    "investment.capex_eur",
    "investment.repayment_years",
    "investment.min_contribution_eur",
    "investment.generation",
];

const BAND_FIELDS: &[&str] = &[
    "periods",
    "auto_network",
    "allo_network",
    "supplier_energy",
    "export",
    "auto_taxes",
    "allo_taxes",
];

#[derive(Debug, Clone)]
pub struct Config {
    dir: PathBuf,
    values: BTreeMap<String, toml::Value>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, dir).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str, dir: PathBuf) -> Result<Self> {
        let table: toml::Table = text.parse()?;
        let mut values = BTreeMap::new();
        flatten("", &table, &mut values);
        for key in values.keys() {
            let known = KNOWN_KEYS.contains(&key.as_str())
                || key
                    .strip_prefix("tariff.bands.")
                    .and_then(|rest| rest.rsplit_once('.'))
                    .is_some_and(|(_, field)| BAND_FIELDS.contains(&field));
            if !known {
                bail!("unknown config key '{key}'");
            }
        }
        Ok(Self { dir, values })
    }

    fn get(&self, key: &str) -> Option<&toml::Value> {
        self.values.get(key)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => as_f64(v).ok_or_else(|| anyhow!("'{key}' must be a number")),
        }
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.get(key).ok_or_else(|| anyhow!("missing config key '{key}'"))?;
        self.f64_or(key, 0.0)
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| anyhow!("'{key}' must be true or false")),
        }
    }

    pub fn str_opt(&self, key: &str) -> Result<Option<&str>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.as_str().map(Some).ok_or_else(|| anyhow!("'{key}' must be a string")),
        }
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.str_opt(key)?.ok_or_else(|| anyhow!("missing config key '{key}'"))
    }

    pub fn path_opt(&self, key: &str) -> Result<Option<PathBuf>> {
        Ok(self.str_opt(key)?.map(|p| self.dir.join(p)))
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        self.path_opt(key)?.ok_or_else(|| anyhow!("missing config key '{key}'"))
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let arr = v.as_array().ok_or_else(|| anyhow!("'{key}' must be an array of numbers"))?;
        arr.iter()
            .map(|x| as_f64(x).ok_or_else(|| anyhow!("'{key}' must be an array of numbers")))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn str_list(&self, key: &str) -> Result<Option<Vec<String>>> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let arr = v.as_array().ok_or_else(|| anyhow!("'{key}' must be an array of strings"))?;
        arr.iter()
            .map(|x| x.as_str().map(str::to_string).ok_or_else(|| anyhow!("'{key}' must be an array of strings")))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn pv_peak_kw(&self) -> Result<f64> {
        self.f64_or("pv.peak_kw", 0.0)
    }

    pub fn storage(&self) -> Result<StorageSpec> {
        let none = StorageSpec::none();
        Ok(StorageSpec {
            capacity_kwh: self.f64_or("storage.capacity_kwh", none.capacity_kwh)?,
            power_kw: self.f64_or("storage.power_kw", none.power_kw)?,
            charge_efficiency: self.f64_or("storage.charge_efficiency", none.charge_efficiency)?,
            discharge_efficiency: self.f64_or("storage.discharge_efficiency", none.discharge_efficiency)?,
            initial_soc_kwh: self.f64_or("storage.initial_soc_kwh", none.initial_soc_kwh)?,
        })
    }

    pub fn allow_grid_charging(&self) -> Result<bool> {
        self.bool_or("dispatch.allow_grid_charging", false)
    }

    /// Builds the tariff from `tariff.bands.<name>.*`, bands in name order.
    pub fn tariff(&self, period_count: usize) -> Result<TariffSchedule> {
        let names: BTreeSet<&str> = self
            .values
            .keys()
            .filter_map(|k| k.strip_prefix("tariff.bands.")?.rsplit_once('.').map(|(n, _)| n))
            .collect();
        if names.is_empty() {
            bail!("no tariff bands configured (tariff.bands.<name>.*)");
        }
        let mut bands = Vec::with_capacity(names.len());
        for name in names {
            let key = |field: &str| format!("tariff.bands.{name}.{field}");
            let periods = parse_periods(self.str(&key("periods"))?, period_count)
                .with_context(|| format!("in '{}'", key("periods")))?;
            bands.push(TariffBand {
                name: name.to_string(),
                periods,
                auto_network: self.f64(&key("auto_network"))?,
                allo_network: self.f64(&key("allo_network"))?,
                supplier_energy: self.f64(&key("supplier_energy"))?,
                export: self.f64_or(&key("export"), 0.0)?,
                auto_taxes: self.f64_or(&key("auto_taxes"), 0.0)?,
                allo_taxes: self.f64_or(&key("allo_taxes"), 0.0)?,
            });
        }
        Ok(TariffSchedule::new(period_count, bands, self.f64_or("tariff.internal_price", 0.0)?)?)
    }

    pub fn community_type(&self) -> Result<CommunityType> {
        Ok(self.str_opt("compliance.community_type")?.unwrap_or("REC").parse()?)
    }

    pub fn governance(&self) -> Result<GovernanceRules> {
        let d = GovernanceRules::default();
        Ok(GovernanceRules {
            control_threshold: self.f64_or("compliance.control_threshold", d.control_threshold)?,
            autonomy_threshold: self.f64_or("compliance.autonomy_threshold", d.autonomy_threshold)?,
        })
    }

    pub fn indicator_factors(&self) -> Result<IndicatorFactors> {
        Ok(IndicatorFactors {
            grid_emission_factor: self.f64_or("indicators.grid_emission_factor", 0.0)?,
            social_cost_of_carbon: self.f64_or("indicators.social_cost_of_carbon", 0.0)?,
            weights: ScoreWeights {
                economic: self.f64_or("indicators.weight_economic", 1.0)?,
                environmental: self.f64_or("indicators.weight_environmental", 0.0)?,
                social: self.f64_or("indicators.weight_social", 0.0)?,
            },
        })
    }

    pub fn pv_options(&self) -> Result<Vec<PvOption>> {
        let peak = self.f64_list("sizing.pv_peak_kw")?.ok_or_else(|| anyhow!("missing 'sizing.pv_peak_kw'"))?;
        let capex = self.f64_list("sizing.pv_capex")?.ok_or_else(|| anyhow!("missing 'sizing.pv_capex'"))?;
        if peak.len() != capex.len() {
            bail!("sizing.pv_peak_kw and sizing.pv_capex differ in length");
        }
        Ok(peak.into_iter().zip(capex).map(|(peak_kw, capex)| PvOption { peak_kw, capex }).collect())
    }

    pub fn storage_options(&self) -> Result<Vec<StorageOption>> {
        let need = |k: &str| self.f64_list(k)?.ok_or_else(|| anyhow!("missing '{k}'"));
        let cap = need("sizing.storage_capacity_kwh")?;
        let power = need("sizing.storage_power_kw")?;
        let capex = need("sizing.storage_capex")?;
        if cap.len() != power.len() || cap.len() != capex.len() {
            bail!("sizing.storage_* lists differ in length");
        }
        Ok((0..cap.len())
            .map(|i| StorageOption { capacity_kwh: cap[i], power_kw: power[i], capex: capex[i] })
            .collect())
    }
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(f) => Some(*f),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

/// Parses 1-based inclusive ranges such as `"1-12,37-48"` into 0-based
/// period indices.
pub fn parse_periods(spec: &str, period_count: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = match part.split_once('-') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (part, part),
        };
        let a: usize = a.parse().with_context(|| format!("bad period '{a}'"))?;
        let b: usize = b.parse().with_context(|| format!("bad period '{b}'"))?;
        if a == 0 || b < a || b > period_count {
            bail!("period range {part} outside 1..={period_count}");
        }
        out.extend(a - 1..b);
    }
    Ok(out)
}
