//! Deterministic inputs for the benchmarks.

use ecplan_core::{
    CommunityScenario, DispatchProblem, LoadMatrix, Member, MemberCategory, PvOption, PvSpec, RepresentativeDay,
    SizingCatalog, StorageOption, StorageSpec, TariffBand, TariffSchedule, TimeGrid,
};
use ndarray::Array2;

/// Bell-shaped production normalized to a peak of one.
pub fn pv_profile(periods: usize) -> Vec<f64> {
    (0..periods)
        .map(|t| {
            let x = (t as f64 + 0.5) / periods as f64;
            (std::f64::consts::PI * (x - 0.25) * 2.0).sin().max(0.0)
        })
        .collect()
}

pub fn load_matrix(periods: usize, members: usize) -> Array2<f64> {
    Array2::from_shape_fn((periods, members), |(t, i)| {
        0.2 + 0.1 * ((t * 7 + i * 13) % 11) as f64 + if (i + t) % 5 == 0 { 0.0 } else { 0.3 }
    })
}

pub fn generation(periods: usize, peak: f64) -> Vec<f64> {
    pv_profile(periods).into_iter().map(|v| v * peak).collect()
}

/// Proposals that overshoot the caps in a structured way.
pub fn proposal(periods: usize, members: usize) -> Array2<f64> {
    Array2::from_shape_fn((periods, members), |(t, i)| ((t + 3 * i) % 9) as f64 * 0.4 - 0.5)
}

pub fn tariff(periods: usize) -> TariffSchedule {
    let split = periods / 3;
    let band = |name: &str, periods: Vec<usize>, energy: f64| TariffBand {
        name: name.into(),
        periods,
        auto_network: 1.5,
        allo_network: 4.0,
        supplier_energy: energy,
        export: 5.0,
        auto_taxes: 1.0,
        allo_taxes: 3.0,
    };
    let bands = vec![
        band("offpeak", (0..split).collect(), 12.0),
        band("peak", (split..periods).collect(), 18.0),
    ];
    TariffSchedule::new(periods, bands, 1.0).unwrap()
}

pub fn storage(capacity_kwh: f64) -> StorageSpec {
    StorageSpec {
        capacity_kwh,
        power_kw: capacity_kwh / 2.0,
        charge_efficiency: 0.95,
        discharge_efficiency: 0.95,
        initial_soc_kwh: 0.0,
    }
}

pub fn dispatch_problem(periods: usize) -> DispatchProblem {
    let load = load_matrix(periods, 15);
    let aggregate = load.rows().into_iter().map(|r| r.sum()).collect();
    DispatchProblem::new(generation(periods, 25.0), aggregate, storage(20.0), tariff(periods), 24.0 / periods as f64)
}

pub fn sizing_inputs() -> (CommunityScenario, SizingCatalog) {
    let periods = 24;
    let scenario = CommunityScenario {
        grid: TimeGrid::new(periods, 1.0).unwrap(),
        members: vec![Member::new("m1", MemberCategory::NaturalPerson, 1.0)],
        load: LoadMatrix(Array2::zeros((periods, 1))),
        pv: PvSpec { peak_kw: 0.0, normalized_profile: vec![0.0; periods] },
        storage: StorageSpec { charge_efficiency: 0.95, discharge_efficiency: 0.95, ..StorageSpec::none() },
        tariff: tariff(periods),
        allow_grid_charging: false,
    };
    let day = |scale: f64, weight: f64| RepresentativeDay {
        aggregate_load: load_matrix(periods, 15).rows().into_iter().map(|r| r.sum()).collect(),
        pv_profile: pv_profile(periods).into_iter().map(|v| v * scale).collect(),
        weight,
    };
    let catalog = SizingCatalog {
        pv_options: [10.0, 25.0, 40.0].map(|kw| PvOption { peak_kw: kw, capex: kw * 1100.0 }).to_vec(),
        storage_options: [0.0, 10.0, 20.0]
            .map(|kwh| StorageOption { capacity_kwh: kwh, power_kw: kwh / 2.0, capex: kwh * 550.0 })
            .to_vec(),
        discount_rate: 0.05,
        lifetime_years: 25,
        days: vec![day(1.0, 182.0), day(0.4, 183.0)],
    };
    (scenario, catalog)
}
