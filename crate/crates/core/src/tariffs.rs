//! Time-of-use tariffs that price locally produced ("autoproduit") and
//! grid-supplied ("alloproduit") energy differently, and member billing.
//!
//! Prices are c€/kWh; bills are accumulated in c€ and only converted to €
//! (rounded half-up to the cent) when reported.

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    /// Network fee on locally produced energy.
    Auto,
    /// Network fee on grid energy.
    Allo,
    /// Supplier energy price.
    Supplier,
    /// Price paid for surplus exported to the grid.
    Export,
}

/// One time-of-use band. `periods` are 0-based period indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TariffBand {
    pub name: String,
    pub periods: Vec<usize>,
    pub auto_network: f64,
    pub allo_network: f64,
    pub supplier_energy: f64,
    pub export: f64,
    pub auto_taxes: f64,
    pub allo_taxes: f64,
}

impl TariffBand {
    /// Band without taxes.
    pub fn flat(
        name: impl Into<String>,
        periods: Vec<usize>,
        auto_network: f64,
        allo_network: f64,
        supplier_energy: f64,
        export: f64,
    ) -> Self {
        Self {
            name: name.into(),
            periods,
            auto_network,
            allo_network,
            supplier_energy,
            export,
            auto_taxes: 0.0,
            allo_taxes: 0.0,
        }
    }

    fn prices(&self) -> [(&'static str, f64); 6] {
        [
            ("auto_network", self.auto_network),
            ("allo_network", self.allo_network),
            ("supplier_energy", self.supplier_energy),
            ("export", self.export),
            ("auto_taxes", self.auto_taxes),
            ("allo_taxes", self.allo_taxes),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TariffSchedule {
    bands: Vec<TariffBand>,
    internal_energy_price: f64,
    band_of: Vec<usize>,
}

impl TariffSchedule {
    /// Builds a schedule whose bands partition `0..period_count`.
    pub fn new(period_count: usize, bands: Vec<TariffBand>, internal_energy_price: f64) -> Result<Self> {
        let mut band_of = vec![usize::MAX; period_count];
        for (b, band) in bands.iter().enumerate() {
            for (what, price) in band.prices() {
                if !(price >= 0.0 && price.is_finite()) {
                    return Err(Error::Tariff(format!("band '{}': {what} = {price} < 0", band.name)));
                }
            }
            for &t in &band.periods {
                let slot = band_of.get_mut(t).ok_or_else(|| {
                    Error::Tariff(format!("band '{}' names period {} beyond {period_count}", band.name, t + 1))
                })?;
                if *slot != usize::MAX {
                    return Err(Error::Tariff(format!(
                        "period {} belongs to bands '{}' and '{}'",
                        t + 1,
                        bands[*slot].name,
                        band.name
                    )));
                }
                *slot = b;
            }
        }
        if let Some(t) = band_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::Tariff(format!("period {} is not covered by any band", t + 1)));
        }
        if !(internal_energy_price >= 0.0) {
            return Err(Error::Tariff(format!("internal energy price {internal_energy_price} < 0")));
        }
        Ok(Self { bands, internal_energy_price, band_of })
    }

    /// A single band covering every period.
    pub fn uniform(period_count: usize, band: TariffBand, internal_energy_price: f64) -> Result<Self> {
        let band = TariffBand { periods: (0..period_count).collect(), ..band };
        Self::new(period_count, vec![band], internal_energy_price)
    }

    pub fn period_count(&self) -> usize {
        self.band_of.len()
    }

    pub fn bands(&self) -> &[TariffBand] {
        &self.bands
    }

    pub fn internal_energy_price(&self) -> f64 {
        self.internal_energy_price
    }

    pub fn band(&self, period: usize) -> Result<&TariffBand> {
        self.band_of
            .get(period)
            .map(|&b| &self.bands[b])
            .ok_or(Error::PeriodOutOfRange { period, period_count: self.period_count() })
    }

    pub fn price_of(&self, period: usize, source: Source) -> Result<f64> {
        let band = self.band(period)?;
        Ok(match source {
            Source::Auto => band.auto_network,
            Source::Allo => band.allo_network,
            Source::Supplier => band.supplier_energy,
            Source::Export => band.export,
        })
    }

    /// Full c€/kWh cost of energy bought from the supplier.
    pub fn allo_cost(&self, period: usize) -> f64 {
        let b = &self.bands[self.band_of[period]];
        b.supplier_energy + b.allo_network + b.allo_taxes
    }

    /// Full c€/kWh cost of energy allocated from local production.
    pub fn auto_cost(&self, period: usize) -> f64 {
        let b = &self.bands[self.band_of[period]];
        self.internal_energy_price + b.auto_network + b.auto_taxes
    }

    pub fn export_price(&self, period: usize) -> f64 {
        self.bands[self.band_of[period]].export
    }

    /// The community cost of a period is convex in local generation only
    /// when exporting a kWh never earns more than sharing it saves.
    pub fn check_convex(&self) -> Result<()> {
        for t in 0..self.period_count() {
            let saving = self.allo_cost(t) - self.auto_cost(t);
            let export = self.export_price(t);
            if export > saving {
                return Err(Error::NonConvexTariff { period: t, export, saving });
            }
        }
        Ok(())
    }

    /// Same schedule with a different internal price.
    pub fn with_internal_price(&self, price: f64) -> Result<Self> {
        Self::new(self.period_count(), self.bands.clone(), price)
    }
}

/// Amount in euro cents.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize)]
pub struct Cents(pub f64);

impl Cents {
    pub fn euros(self) -> f64 {
        self.0 / 100.0
    }

    /// Euros rounded half-up to the cent.
    pub fn euros_rounded(self) -> f64 {
        round_half_up_cents(self.0) / 100.0
    }
}

impl std::ops::Add for Cents {
    type Output = Cents;
    fn add(self, rhs: Cents) -> Cents {
        Cents(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for Cents {
    fn add_assign(&mut self, rhs: Cents) {
        self.0 += rhs.0;
    }
}

impl std::ops::Sub for Cents {
    type Output = Cents;
    fn sub(self, rhs: Cents) -> Cents {
        Cents(self.0 - rhs.0)
    }
}

impl std::iter::Sum for Cents {
    fn sum<I: Iterator<Item = Cents>>(iter: I) -> Cents {
        Cents(iter.map(|c| c.0).sum())
    }
}

/// Rounds a c€ amount to a whole cent, halves going up. Noise below a
/// millionth of a cent is dropped first, so 61.4999999999 counts as 61.5.
pub fn round_half_up_cents(cents: f64) -> f64 {
    let cleaned = (cents * 1e6).round() / 1e6;
    (cleaned + 0.5).floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MemberBill {
    pub residual_energy_cost: Cents,
    pub residual_network_cost: Cents,
    pub shared_network_cost: Cents,
    pub shared_energy_cost: Cents,
    pub taxes: Cents,
    pub total: Cents,
}

impl MemberBill {
    pub fn network_cost(&self) -> Cents {
        self.residual_network_cost + self.shared_network_cost
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bill {
    pub members: Vec<MemberBill>,
    pub export_revenue: Cents,
}

impl Bill {
    pub fn members_total(&self) -> Cents {
        self.members.iter().map(|m| m.total).sum()
    }

    pub fn network_total(&self) -> Cents {
        self.members.iter().map(|m| m.network_cost()).sum()
    }

    pub fn supplier_total(&self) -> Cents {
        self.members.iter().map(|m| m.residual_energy_cost).sum()
    }
}

/// Bills every member for its residual (grid) and shared (local) energy
/// and books export revenue at community level.
pub fn compute_bills(
    load: ArrayView2<f64>,
    key: ArrayView2<f64>,
    residual: ArrayView2<f64>,
    export: &[f64],
    schedule: &TariffSchedule,
) -> Result<Bill> {
    let dim = load.dim();
    if key.dim() != dim || residual.dim() != dim {
        return Err(Error::Dimension(format!(
            "load {:?}, key {:?}, residual {:?}",
            dim,
            key.dim(),
            residual.dim()
        )));
    }
    if export.len() != dim.0 || schedule.period_count() != dim.0 {
        return Err(Error::Dimension(format!(
            "{} periods of load, {} of export, {} in tariff",
            dim.0,
            export.len(),
            schedule.period_count()
        )));
    }
    let internal = schedule.internal_energy_price();
    let mut members = vec![MemberBill::default(); dim.1];
    for t in 0..dim.0 {
        let band = schedule.band(t)?;
        for (n, bill) in members.iter_mut().enumerate() {
            let r = residual[[t, n]];
            let s = key[[t, n]];
            bill.residual_energy_cost.0 += r * band.supplier_energy;
            bill.residual_network_cost.0 += r * band.allo_network;
            bill.shared_network_cost.0 += s * band.auto_network;
            bill.shared_energy_cost.0 += s * internal;
            bill.taxes.0 += r * band.allo_taxes + s * band.auto_taxes;
        }
    }
    for b in &mut members {
        b.total = b.residual_energy_cost
            + b.residual_network_cost
            + b.shared_network_cost
            + b.shared_energy_cost
            + b.taxes;
    }
    let export_revenue = Cents(
        export
            .iter()
            .enumerate()
            .map(|(t, x)| x * schedule.export_price(t))
            .sum(),
    );
    Ok(Bill { members, export_revenue })
}

/// Bill with no community: all load bought from the supplier.
pub fn business_as_usual_bills(load: ArrayView2<f64>, schedule: &TariffSchedule) -> Result<Bill> {
    let zero = Array2::zeros(load.dim());
    compute_bills(load, zero.view(), load, &vec![0.0; load.nrows()], schedule)
}
