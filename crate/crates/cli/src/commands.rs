//! The batch commands. Each reads the config, runs the relevant pipeline
//! and writes its artifacts into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ecplan_core::{
    allocation, assess, build_impact_report, compute_bills, default_pro_rata_key, fixed_ratio_key, generation_shares,
    is_feasible_key, optimize_sizing, priority_key, repayment_schedule, residual_load, solve_dispatch,
    stakeholder_deltas, validate_scenario, allocate_project_energy, business_as_usual_bills, Bill, CommunityOutcome,
    CommunityScenario, ComplianceVerdict, Contribution, DispatchProblem, DispatchResult, ImpactReport,
    InvestmentPool, KeyViolation, LoadMatrix, Member, MemberCategory, Project, ProximityMethod, PvSpec,
    RepresentativeDay, SizingCatalog, SizingResult,
};
use log::{info, warn};
use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::config::Config;
use crate::io::{self, csv_writer};
use crate::output::{energy, energy_row, eur, eur_from_cents, ser_energy, ser_eur, to_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Build the repartition key and its feasibility verdict.
    Allocate,
    /// Optimize storage dispatch.
    Dispatch,
    /// Choose PV and storage sizes from a catalog.
    Size,
    /// Dispatch, allocate, bill and compute impact indicators.
    Report,
    /// Check proximity and governance rules.
    Check,
    /// Generation shares and repayment schedules of an investment pool.
    Invest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    Csv,
    #[default]
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// How a command ended; maps to the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Invalid,
    NonCompliant,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Invalid => 1,
            Outcome::NonCompliant => 2,
        }
    }
}

pub struct Run {
    pub config: Config,
    pub out: PathBuf,
    pub format: Format,
}

pub fn run(command: Command, ctx: &Run) -> Result<Outcome> {
    fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    match command {
        Command::Allocate => allocate(ctx),
        Command::Dispatch => dispatch(ctx),
        Command::Size => size(ctx),
        Command::Report => report(ctx),
        Command::Check => check(ctx),
        Command::Invest => invest(ctx),
    }
}

/// A scenario together with the member ids in load-column order.
pub struct LoadedScenario {
    pub ids: Vec<String>,
    pub scenario: CommunityScenario,
}

pub fn load_scenario(cfg: &Config) -> Result<LoadedScenario> {
    let load_path = cfg.path("data.load")?;
    let series = io::load_profiles(&load_path)?;
    let grid = series.grid;
    let ids = series.columns.clone();
    info!("load: {} periods x {} members, step {} h", grid.period_count, ids.len(), grid.step_hours);

    let normalized_profile = match cfg.path_opt("data.pv")? {
        Some(p) => {
            let pv = io::read_time_series(&p)?;
            if pv.columns.len() != 1 {
                bail!("{}: expected a single value column", p.display());
            }
            if pv.timestamps != series.timestamps {
                bail!("{}: timestamps differ from {}", p.display(), load_path.display());
            }
            pv.values.column(0).to_vec()
        }
        None => vec![0.0; grid.period_count],
    };

    let members = match cfg.path_opt("data.members")? {
        Some(p) => order_members(io::read_members(&p)?, &ids).with_context(|| format!("in {}", p.display()))?,
        None => {
            let share = 1.0 / ids.len() as f64;
            ids.iter().map(|id| Member::new(id.clone(), MemberCategory::NaturalPerson, share)).collect()
        }
    };

    let scenario = CommunityScenario {
        grid,
        members,
        load: LoadMatrix(series.values),
        pv: PvSpec { peak_kw: cfg.pv_peak_kw()?, normalized_profile },
        storage: cfg.storage()?,
        tariff: cfg.tariff(grid.period_count)?,
        allow_grid_charging: cfg.allow_grid_charging()?,
    };
    Ok(LoadedScenario { ids, scenario })
}

fn order_members(members: Vec<Member>, ids: &[String]) -> Result<Vec<Member>> {
    if members.len() != ids.len() {
        bail!("{} members listed, load has {} columns", members.len(), ids.len());
    }
    ids.iter()
        .map(|id| {
            members
                .iter()
                .find(|m| &m.id == id)
                .cloned()
                .ok_or_else(|| anyhow!("load column '{id}' has no member row"))
        })
        .collect()
}

/// Loads and validates the scenario; problems are printed and `None` is
/// returned.
fn valid_scenario(cfg: &Config) -> Result<Option<LoadedScenario>> {
    let loaded = load_scenario(cfg)?;
    let report = validate_scenario(&loaded.scenario);
    if report.is_valid() {
        return Ok(Some(loaded));
    }
    for v in &report.violations {
        eprintln!("invalid scenario: {v}");
    }
    Ok(None)
}

fn dispatch_problem(s: &CommunityScenario) -> DispatchProblem {
    let mut problem = DispatchProblem::new(
        s.pv.production(),
        s.load.aggregate(),
        s.storage,
        s.tariff.clone(),
        s.grid.step_hours,
    );
    problem.allow_grid_charging = s.allow_grid_charging;
    problem
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes `name.json` or `name.csv` (two columns `field,value`).
fn write_summary<T: Serialize>(ctx: &Run, name: &str, value: &T) -> Result<PathBuf> {
    let path = ctx.out.join(format!("{name}.{}", ctx.format.extension()));
    match ctx.format {
        Format::Json => write_text(&path, &to_json(value)?)?,
        Format::Csv => {
            let json: serde_json::Value = serde_json::from_str(&serde_json::to_string(value)?)?;
            let mut w = csv_writer(&path)?;
            w.write_record(["field", "value"])?;
            flatten_json("", &json, &mut w)?;
            w.flush()?;
        }
    }
    Ok(path)
}

fn flatten_json(prefix: &str, v: &serde_json::Value, w: &mut csv::Writer<fs::File>) -> Result<()> {
    use serde_json::Value;
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_json(&key, v, w)?;
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten_json(&format!("{prefix}.{}", i + 1), v, w)?;
            }
        }
        Value::String(s) => w.write_record([prefix, s])?,
        other => w.write_record([prefix, &other.to_string()])?,
    }
    Ok(())
}

pub fn write_key(path: &Path, ids: &[String], key: ArrayView2<f64>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(std::iter::once("period".to_string()).chain(ids.iter().cloned()))?;
    for (t, row) in key.rows().into_iter().enumerate() {
        w.write_record(std::iter::once((t + 1).to_string()).chain(energy_row(&row.to_vec())))?;
    }
    w.flush()?;
    Ok(())
}

fn write_dispatch(path: &Path, problem: &DispatchProblem, r: &DispatchResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["period", "pv", "load", "charge", "grid_charge", "discharge", "soc", "shared", "export"])?;
    for t in 0..problem.periods() {
        let values = [
            problem.pv[t],
            problem.aggregate_load[t],
            r.charge[t],
            r.grid_charge[t],
            r.discharge[t],
            r.soc[t],
            r.shared[t],
            r.export[t],
        ];
        w.write_record(std::iter::once((t + 1).to_string()).chain(values.iter().map(|v| energy(*v))))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ViolationOut {
    period: usize,
    member: Option<String>,
    kind: allocation::ViolationKind,
    #[serde(serialize_with = "ser_energy")]
    value: f64,
    #[serde(serialize_with = "ser_energy")]
    bound: f64,
}

#[derive(Serialize)]
struct AllocationVerdict {
    rule: String,
    feasible: bool,
    #[serde(serialize_with = "ser_energy")]
    generation: f64,
    #[serde(serialize_with = "ser_energy")]
    allocated: f64,
    #[serde(serialize_with = "ser_energy")]
    load: f64,
    violations: Vec<ViolationOut>,
}

/// Key from the configured rule. External keys are returned as read, even
/// when infeasible.
fn build_key(cfg: &Config, ids: &[String], g: &[f64], load: ArrayView2<f64>) -> Result<(String, Array2<f64>)> {
    let rule = cfg.str_opt("allocation.rule")?.unwrap_or("pro_rata").to_string();
    let key = match rule.as_str() {
        "pro_rata" => default_pro_rata_key(g, load)?.into_inner(),
        "priority" => {
            let order = cfg.str_list("allocation.order")?.ok_or_else(|| anyhow!("priority rule needs 'allocation.order'"))?;
            let order = order
                .iter()
                .map(|id| ids.iter().position(|x| x == id).ok_or_else(|| anyhow!("unknown member '{id}' in allocation.order")))
                .collect::<Result<Vec<_>>>()?;
            priority_key(g, load, &order)?.into_inner()
        }
        "fixed_ratio" => {
            let weights = cfg
                .f64_list("allocation.weights")?
                .ok_or_else(|| anyhow!("fixed_ratio rule needs 'allocation.weights'"))?;
            fixed_ratio_key(g, load, &weights)?.into_inner()
        }
        "external_key" => io::read_key(&cfg.path("allocation.key")?, ids, load.nrows())?,
        other => bail!("unknown allocation rule '{other}' (pro_rata, priority, fixed_ratio, external_key)"),
    };
    Ok((rule, key))
}

fn violations_out(ids: &[String], v: &[KeyViolation]) -> Vec<ViolationOut> {
    v.iter()
        .map(|x| ViolationOut {
            period: x.period + 1,
            member: x.member.map(|n| ids[n].clone()),
            kind: x.kind,
            value: x.value,
            bound: x.bound,
        })
        .collect()
}

struct Allocated {
    problem: DispatchProblem,
    dispatch: DispatchResult,
    rule: String,
    key: Array2<f64>,
    violations: Vec<KeyViolation>,
}

fn dispatch_and_allocate(cfg: &Config, loaded: &LoadedScenario) -> Result<Allocated> {
    let s = &loaded.scenario;
    let problem = dispatch_problem(s);
    let dispatch = solve_dispatch(&problem)?;
    let (rule, key) = build_key(cfg, &loaded.ids, &dispatch.shared, s.load.0.view())?;
    let (_, violations) = is_feasible_key(key.view(), &dispatch.shared, s.load.0.view(), ecplan_core::FEASIBILITY_TOL)?;
    Ok(Allocated { problem, dispatch, rule, key, violations })
}

fn report_violations(ids: &[String], violations: &[KeyViolation]) {
    for v in violations.iter().take(20) {
        let who = v.member.map_or(String::new(), |n| format!(" ({})", ids[n]));
        eprintln!("infeasible key: {v}{who}");
    }
    if violations.len() > 20 {
        eprintln!("infeasible key: {} more violations", violations.len() - 20);
    }
}

fn allocate(ctx: &Run) -> Result<Outcome> {
    let Some(loaded) = valid_scenario(&ctx.config)? else { return Ok(Outcome::Invalid) };
    let a = dispatch_and_allocate(&ctx.config, &loaded)?;
    let load = &loaded.scenario.load.0;
    let verdict = AllocationVerdict {
        rule: a.rule.clone(),
        feasible: a.violations.is_empty(),
        generation: a.dispatch.shared.iter().sum(),
        allocated: a.key.sum(),
        load: load.sum(),
        violations: violations_out(&loaded.ids, &a.violations),
    };
    let path = write_summary(ctx, "allocation", &verdict)?;
    if !verdict.feasible {
        report_violations(&loaded.ids, &a.violations);
        println!("allocation infeasible: {} violations, see {}", a.violations.len(), path.display());
        return Ok(Outcome::Invalid);
    }
    write_key(&ctx.out.join("key.csv"), &loaded.ids, a.key.view())?;
    println!("allocation feasible ({}): {} of {} kWh allocated", a.rule, energy(verdict.allocated), energy(verdict.load));
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct DispatchSummary {
    #[serde(serialize_with = "ser_eur")]
    objective_cost: f64,
    #[serde(serialize_with = "ser_eur")]
    business_as_usual_cost: f64,
    #[serde(serialize_with = "ser_energy")]
    pv: f64,
    #[serde(serialize_with = "ser_energy")]
    shared: f64,
    #[serde(serialize_with = "ser_energy")]
    export: f64,
    #[serde(serialize_with = "ser_energy")]
    grid_charge: f64,
}

fn dispatch(ctx: &Run) -> Result<Outcome> {
    let Some(loaded) = valid_scenario(&ctx.config)? else { return Ok(Outcome::Invalid) };
    let problem = dispatch_problem(&loaded.scenario);
    let r = solve_dispatch(&problem)?;
    write_dispatch(&ctx.out.join("dispatch.csv"), &problem, &r)?;
    let summary = DispatchSummary {
        objective_cost: r.objective_cost,
        business_as_usual_cost: problem.business_as_usual_cost(),
        pv: problem.pv.iter().sum(),
        shared: r.shared.iter().sum(),
        export: r.export.iter().sum(),
        grid_charge: r.grid_charge.iter().sum(),
    };
    write_summary(ctx, "dispatch", &summary)?;
    println!(
        "dispatch cost {} EUR (business as usual {} EUR)",
        eur(summary.objective_cost),
        eur(summary.business_as_usual_cost)
    );
    Ok(Outcome::Success)
}

pub fn sizing_catalog(cfg: &Config, s: &CommunityScenario) -> Result<SizingCatalog> {
    let periods = s.grid.period_count;
    let days = match cfg.path_opt("sizing.days")? {
        Some(p) => io::read_days(&p, periods)?,
        None => vec![RepresentativeDay {
            aggregate_load: s.load.aggregate(),
            pv_profile: s.pv.normalized_profile.clone(),
            weight: cfg.f64_or("sizing.day_weight", 365.0)?,
        }],
    };
    let years = cfg.f64_or("sizing.lifetime_years", 25.0)?;
    if years.fract() != 0.0 || years < 1.0 {
        bail!("sizing.lifetime_years must be a positive whole number");
    }
    Ok(SizingCatalog {
        pv_options: cfg.pv_options()?,
        storage_options: cfg.storage_options()?,
        discount_rate: cfg.f64_or("sizing.discount_rate", 0.05)?,
        lifetime_years: years as u32,
        days,
    })
}

pub fn write_candidates(path: &Path, result: &SizingResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "candidate",
        "pv_option",
        "storage_option",
        "peak_kw",
        "capacity_kwh",
        "power_kw",
        "capex_eur",
        "annualized_capex_eur",
        "annual_operation_cost_eur",
        "total_eur",
        "chosen",
    ])?;
    let idx = |o: Option<usize>| o.map_or("baseline".to_string(), |i| (i + 1).to_string());
    for (i, c) in result.table.iter().enumerate() {
        w.write_record([
            i.to_string(),
            idx(c.pv),
            idx(c.storage),
            energy(c.peak_kw),
            energy(c.capacity_kwh),
            energy(c.power_kw),
            eur(c.capex),
            eur(c.annualized_capex),
            eur(c.annual_operation_cost),
            eur(c.total),
            (i == result.chosen).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SizingSummary {
    candidate: usize,
    pv_option: usize,
    storage_option: usize,
    #[serde(serialize_with = "ser_energy")]
    peak_kw: f64,
    #[serde(serialize_with = "ser_energy")]
    capacity_kwh: f64,
    #[serde(serialize_with = "ser_energy")]
    power_kw: f64,
    #[serde(serialize_with = "ser_eur")]
    annualized_capex: f64,
    #[serde(serialize_with = "ser_eur")]
    annual_operation_cost: f64,
    #[serde(serialize_with = "ser_eur")]
    total: f64,
    #[serde(serialize_with = "ser_eur")]
    baseline_total: f64,
}

fn size(ctx: &Run) -> Result<Outcome> {
    let Some(loaded) = valid_scenario(&ctx.config)? else { return Ok(Outcome::Invalid) };
    let s = &loaded.scenario;
    let catalog = sizing_catalog(&ctx.config, s)?;
    let parallel = ctx.config.bool_or("sizing.parallel", true)?;
    info!(
        "sizing {} PV x {} storage options over {} days",
        catalog.pv_options.len(),
        catalog.storage_options.len(),
        catalog.days.len()
    );
    let result = optimize_sizing(s, &catalog, parallel)?;
    write_candidates(&ctx.out.join("candidates.csv"), &result)?;
    let chosen = &result.table[result.chosen];
    let summary = SizingSummary {
        candidate: result.chosen,
        pv_option: chosen.pv.map_or(0, |i| i + 1),
        storage_option: chosen.storage.map_or(0, |i| i + 1),
        peak_kw: result.pv.peak_kw,
        capacity_kwh: result.storage.capacity_kwh,
        power_kw: result.storage.power_kw,
        annualized_capex: result.annualized_capex,
        annual_operation_cost: result.annual_operation_cost,
        total: result.total,
        baseline_total: result.baseline().total,
    };
    write_summary(ctx, "sizing", &summary)?;
    println!(
        "chosen PV {} kWp, storage {} kWh / {} kW: {} EUR per year",
        energy(summary.peak_kw),
        energy(summary.capacity_kwh),
        energy(summary.power_kw),
        eur(summary.total)
    );
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct Figure {
    #[serde(serialize_with = "ser_eur")]
    community: f64,
    #[serde(serialize_with = "ser_eur")]
    business_as_usual: f64,
    #[serde(serialize_with = "ser_eur")]
    delta: f64,
}

#[derive(Serialize)]
struct EnergyFigure {
    #[serde(serialize_with = "ser_energy")]
    community: f64,
    #[serde(serialize_with = "ser_energy")]
    business_as_usual: f64,
    #[serde(serialize_with = "ser_energy")]
    delta: f64,
}

#[derive(Serialize)]
struct Deltas {
    #[serde(serialize_with = "ser_eur")]
    dso: f64,
    #[serde(serialize_with = "ser_eur")]
    supplier: f64,
}

#[derive(Serialize)]
struct ReportOut {
    rule: String,
    members: usize,
    periods: usize,
    #[serde(serialize_with = "ser_energy")]
    step_hours: f64,
    #[serde(serialize_with = "ser_energy")]
    load: f64,
    #[serde(serialize_with = "ser_energy")]
    generation: f64,
    #[serde(serialize_with = "ser_energy")]
    allocated: f64,
    #[serde(serialize_with = "ser_energy")]
    export: f64,
    total_energy_cost: Figure,
    #[serde(serialize_with = "ser_energy")]
    renewable_share: f64,
    dso_revenue: Figure,
    supplier_revenue: Figure,
    stakeholder_deltas: Deltas,
    emissions_t: EnergyFigure,
    #[serde(serialize_with = "ser_eur")]
    emissions_value: f64,
    #[serde(serialize_with = "ser_eur")]
    vulnerable_savings: f64,
    #[serde(serialize_with = "ser_eur")]
    export_revenue: f64,
    #[serde(serialize_with = "ser_eur")]
    weighted_score: f64,
}

fn figure(c: ecplan_core::Comparison) -> Figure {
    Figure { community: c.community, business_as_usual: c.business_as_usual, delta: c.delta }
}

fn write_bills(path: &Path, ids: &[String], bill: &Bill, bau: &Bill) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "member",
        "residual_energy_eur",
        "residual_network_eur",
        "shared_network_eur",
        "shared_energy_eur",
        "taxes_eur",
        "total_eur",
        "business_as_usual_eur",
    ])?;
    for ((id, b), base) in ids.iter().zip(&bill.members).zip(&bau.members) {
        w.write_record([
            id.clone(),
            eur_from_cents(b.residual_energy_cost.0),
            eur_from_cents(b.residual_network_cost.0),
            eur_from_cents(b.shared_network_cost.0),
            eur_from_cents(b.shared_energy_cost.0),
            eur_from_cents(b.taxes.0),
            eur_from_cents(b.total.0),
            eur_from_cents(base.total.0),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_plot_data(path: &Path, g: &[f64], load: ArrayView2<f64>, key: ArrayView2<f64>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["period", "generation", "load", "allocated", "surplus"])?;
    for (t, &gt) in g.iter().enumerate() {
        let l = load.row(t).sum();
        let values = [gt, l, key.row(t).sum(), (gt - l).max(0.0)];
        w.write_record(std::iter::once((t + 1).to_string()).chain(values.iter().map(|v| energy(*v))))?;
    }
    w.flush()?;
    Ok(())
}

fn report(ctx: &Run) -> Result<Outcome> {
    let cfg = &ctx.config;
    let Some(loaded) = valid_scenario(cfg)? else { return Ok(Outcome::Invalid) };
    let s = &loaded.scenario;
    let a = dispatch_and_allocate(cfg, &loaded)?;
    if !a.violations.is_empty() {
        report_violations(&loaded.ids, &a.violations);
        return Ok(Outcome::Invalid);
    }
    let load = s.load.0.view();
    let residual = residual_load(load, a.key.view())?;
    let bill = compute_bills(load, a.key.view(), residual.view(), &a.dispatch.export, &s.tariff)?;
    let bau = business_as_usual_bills(load, &s.tariff)?;
    let outcome = CommunityOutcome { load, key: a.key.view(), bill: &bill, grid_charge: &a.dispatch.grid_charge };
    let r: ImpactReport = build_impact_report(&outcome, &s.members, &s.tariff, &cfg.indicator_factors()?)?;
    let deltas = stakeholder_deltas(a.key.view(), &s.tariff)?;

    write_dispatch(&ctx.out.join("dispatch.csv"), &a.problem, &a.dispatch)?;
    write_key(&ctx.out.join("key.csv"), &loaded.ids, a.key.view())?;
    write_plot_data(&ctx.out.join("plot_data.csv"), &a.dispatch.shared, load, a.key.view())?;
    write_bills(&ctx.out.join("bills.csv"), &loaded.ids, &bill, &bau)?;

    let out = ReportOut {
        rule: a.rule,
        members: loaded.ids.len(),
        periods: s.grid.period_count,
        step_hours: s.grid.step_hours,
        load: load.sum(),
        generation: a.dispatch.shared.iter().sum(),
        allocated: a.key.sum(),
        export: a.dispatch.export.iter().sum(),
        total_energy_cost: figure(r.total_energy_cost),
        renewable_share: r.renewable_share,
        dso_revenue: figure(r.dso_revenue),
        supplier_revenue: figure(r.supplier_revenue),
        stakeholder_deltas: Deltas { dso: deltas.dso, supplier: deltas.supplier },
        emissions_t: EnergyFigure {
            community: r.emissions_t.community,
            business_as_usual: r.emissions_t.business_as_usual,
            delta: r.emissions_t.delta,
        },
        emissions_value: r.emissions_value,
        vulnerable_savings: r.vulnerable_savings,
        export_revenue: bill.export_revenue.euros(),
        weighted_score: r.weighted_score,
    };
    write_summary(ctx, "report", &out)?;
    println!(
        "renewable share {}, community cost {} EUR vs {} EUR business as usual",
        energy(out.renewable_share),
        eur(out.total_energy_cost.community),
        eur(out.total_energy_cost.business_as_usual)
    );
    Ok(Outcome::Success)
}

fn check(ctx: &Run) -> Result<Outcome> {
    let cfg = &ctx.config;
    let members_path = cfg.path("data.members")?;
    let members = io::read_members(&members_path)?;
    let assets = io::read_assets(&cfg.path("data.assets")?)?;
    let community_type = cfg.community_type()?;
    let method_name = cfg.str_opt("compliance.method")?.unwrap_or("network");
    let graph;
    let allowed = cfg.str_list("compliance.allowed_transformers")?;
    let method = match method_name {
        "network" => {
            graph = io::read_feeder(&cfg.path("data.feeder")?)?;
            ProximityMethod::Network { graph: &graph, allowed_transformers: allowed.as_deref() }
        }
        "distance" => ProximityMethod::Distance { radius_km: cfg.f64("compliance.radius_km")? },
        "admin" => ProximityMethod::Administrative,
        other => bail!("unknown proximity method '{other}' (network, distance, admin)"),
    };
    if allowed.is_some() && method_name != "network" {
        warn!("compliance.allowed_transformers is ignored by the {method_name} method");
    }
    let verdict: ComplianceVerdict = assess(&members, &assets, community_type, &method, &cfg.governance()?)?;
    let path = ctx.out.join(format!("verdict.{}", ctx.format.extension()));
    match ctx.format {
        Format::Json => write_text(&path, &to_json(&verdict)?)?,
        Format::Csv => {
            let mut w = csv_writer(&path)?;
            w.write_record(["rule", "severity", "message", "members"])?;
            for f in &verdict.findings {
                let severity = serde_json::to_value(f.severity)?;
                w.write_record([
                    f.rule.as_str(),
                    severity.as_str().unwrap_or_default(),
                    f.message.as_str(),
                    f.members.join(";").as_str(),
                ])?;
            }
            w.flush()?;
        }
    }
    for f in &verdict.findings {
        eprintln!("{f}");
    }
    println!(
        "{} community {}: {} findings",
        community_type,
        if verdict.passed { "passed" } else { "failed" },
        verdict.findings.len()
    );
    Ok(if verdict.passed { Outcome::Success } else { Outcome::NonCompliant })
}

#[derive(Serialize)]
struct InvestSummary {
    project: String,
    #[serde(serialize_with = "ser_energy")]
    peak_kw: f64,
    capex_eur: String,
    pooled_eur: String,
    participants: usize,
    repayment_years: u32,
    #[serde(serialize_with = "ser_energy")]
    pooled_fraction: f64,
}

fn invest(ctx: &Run) -> Result<Outcome> {
    let cfg = &ctx.config;
    let rows = io::read_pool(&cfg.path("investment.pool")?)?;
    let capex = cfg.f64("investment.capex_eur")?;
    let min = cfg.f64_or("investment.min_contribution_eur", 100.0)?;
    let years = cfg.f64_or("investment.repayment_years", 25.0)?;
    if years.fract() != 0.0 || years < 1.0 {
        bail!("investment.repayment_years must be a positive whole number");
    }
    let project = Project {
        name: cfg.str_opt("investment.project_name")?.unwrap_or("project").to_string(),
        peak_kw: cfg.f64_or("investment.peak_kw", 0.0)?,
        capex_cents: (capex * 100.0).round() as i64,
    };
    let contributions: Vec<Contribution> = rows
        .into_iter()
        .map(|(participant, loan_cents)| Contribution { participant, loan_cents })
        .collect();
    let pool = InvestmentPool::new(contributions, project, years as u32, (min * 100.0).round() as i64)?;
    let shares = generation_shares(&pool)?;
    let schedules = repayment_schedule(&pool);

    let mut w = csv_writer(&ctx.out.join("shares.csv"))?;
    w.write_record(["participant_id", "loan_eur", "share"])?;
    for (c, s) in pool.contributions().iter().zip(&shares) {
        w.write_record([c.participant.clone(), ecplan_core::investment::format_cents(c.loan_cents), energy(*s)])?;
    }
    w.flush()?;

    let mut w = csv_writer(&ctx.out.join("schedule.csv"))?;
    w.write_record(["participant_id", "year", "amount_eur"])?;
    for (c, sched) in pool.contributions().iter().zip(&schedules) {
        for i in sched {
            w.write_record([
                c.participant.clone(),
                i.year.to_string(),
                ecplan_core::investment::format_cents(i.amount_cents),
            ])?;
        }
    }
    w.flush()?;

    if let Some(p) = cfg.path_opt("investment.generation")? {
        let (generation, _) = io::load_generation(&p)?;
        let split = allocate_project_energy(&pool, &generation)?;
        let mut w = csv_writer(&ctx.out.join("energy.csv"))?;
        w.write_record(std::iter::once("period".to_string()).chain(pool.contributions().iter().map(|c| c.participant.clone())))?;
        for t in 0..generation.len() {
            w.write_record(std::iter::once((t + 1).to_string()).chain(split.iter().map(|v| energy(v[t]))))?;
        }
        w.flush()?;
    }

    let summary = InvestSummary {
        project: pool.project().name.clone(),
        peak_kw: pool.project().peak_kw,
        capex_eur: ecplan_core::investment::format_cents(pool.project().capex_cents),
        pooled_eur: ecplan_core::investment::format_cents(pool.total_cents()),
        participants: pool.contributions().len(),
        repayment_years: pool.repayment_years(),
        pooled_fraction: pool.total_cents() as f64 / pool.project().capex_cents as f64,
    };
    write_summary(ctx, "investment", &summary)?;
    println!(
        "{}: {} participants lend {} EUR of {} EUR over {} years",
        summary.project, summary.participants, summary.pooled_eur, summary.capex_eur, summary.repayment_years
    );
    Ok(Outcome::Success)
}
