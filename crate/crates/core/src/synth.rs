//! Seeded synthetic sales data with known components.
//!
//! Used for generate-and-recover checks and to stand in for the M5 subset
//! when running the simulation harness without the competition files.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{EventCalendar, TimeSeries};
use crate::date::Day;
use crate::gam::basis::YEAR_DAYS;

/// First day of the M5 sales history.
pub fn m5_start() -> Day {
    Day::from_ymd(2011, 1, 29).expect("valid date")
}

/// Number of days in the M5 sales history.
pub const M5_DAYS: usize = 1941;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthEvent {
    pub name: String,
    pub days: Vec<Day>,
    pub effect: f64,
}

impl SynthEvent {
    /// The event on the same month/day of every year in `[from, to]`.
    pub fn yearly(name: &str, month: u32, day: u32, from: Day, to: Day, effect: f64) -> Self {
        let (y0, y1) = (from.to_naive(), to.to_naive());
        let days = (chrono::Datelike::year(&y0)..=chrono::Datelike::year(&y1))
            .filter_map(|y| Day::from_ymd(y, month, day))
            .filter(|d| *d >= from && *d <= to)
            .collect();
        SynthEvent {
            name: name.to_string(),
            days,
            effect,
        }
    }
}

/// Components of a synthetic series. All effects are additive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub product_id: String,
    pub start: Day,
    pub days: usize,
    pub level: f64,
    /// Linear drift per day.
    pub slope: f64,
    /// Effect per weekday, Monday first.
    pub weekly: [f64; 7],
    /// Amplitude of `cos(2π (doy - 1) / 365.25 - phase)`.
    pub yearly_amplitude: f64,
    pub yearly_phase: f64,
    pub events: Vec<SynthEvent>,
    pub noise_sd: f64,
    /// Standard deviation of random-walk steps added to the level.
    pub random_walk_sd: f64,
    /// Round to whole units, as for count data.
    pub round: bool,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(product_id: &str, start: Day, days: usize, level: f64) -> Self {
        SynthSpec {
            product_id: product_id.to_string(),
            start,
            days,
            level,
            slope: 0.0,
            weekly: [0.0; 7],
            yearly_amplitude: 0.0,
            yearly_phase: 0.0,
            events: Vec::new(),
            noise_sd: 0.0,
            random_walk_sd: 0.0,
            round: false,
            seed: 0,
        }
    }

    /// Noise-free value of the deterministic components on `day`.
    pub fn signal(&self, day: Day) -> f64 {
        let t = day.since(self.start) as f64;
        let doy = day.day_of_year() as f64;
        let yearly = self.yearly_amplitude
            * (std::f64::consts::TAU * (doy - 1.0) / YEAR_DAYS - self.yearly_phase).cos();
        let events: f64 = self
            .events
            .iter()
            .filter(|e| e.days.contains(&day))
            .map(|e| e.effect)
            .sum();
        self.level + self.slope * t + self.weekly[day.weekday()] + yearly + events
    }

    pub fn calendar(&self) -> EventCalendar {
        let mut cal = EventCalendar::new();
        let mut by_day: std::collections::BTreeMap<Day, Vec<String>> = Default::default();
        for e in &self.events {
            for d in &e.days {
                by_day.entry(*d).or_default().push(e.name.clone());
            }
        }
        for (d, names) in by_day {
            cal.set(d, names).expect("synthetic calendar has at most two events per day");
        }
        cal
    }

    /// Draws the series. Values are clamped at zero.
    pub fn generate(&self) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.noise_sd.max(0.0)).expect("finite sd");
        let step = Normal::new(0.0, self.random_walk_sd.max(0.0)).expect("finite sd");
        let mut walk = 0.0;
        let sales = (0..self.days as i32)
            .map(|i| {
                let day = self.start.offset(i);
                if i > 0 {
                    walk += step.sample(&mut rng);
                }
                let v = self.signal(day) + walk + noise.sample(&mut rng);
                let v = if self.round { v.round() } else { v };
                v.max(0.0)
            })
            .collect();
        TimeSeries::new(self.product_id.clone(), self.start, sales).expect("clamped at zero")
    }
}

/// A set of M5-like daily food series sharing one event calendar.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub series: Vec<TimeSeries>,
    pub calendar: EventCalendar,
}

/// Generates `n_products` count series of `days` days starting at the M5
/// start date, with varied levels, weekly and yearly patterns, holiday
/// effects and mild level drift. Like the M5 calendar, the event calendar
/// runs 28 days past the end of the sales history.
pub fn m5_like_dataset(n_products: usize, days: usize, seed: u64) -> SynthDataset {
    let start = m5_start();
    let end = start.offset(days as i32 + 27);
    let holidays = [
        ("NewYear", 1, 1),
        ("ValentinesDay", 2, 14),
        ("StPatricksDay", 3, 17),
        ("MemorialDay", 5, 30),
        ("IndependenceDay", 7, 4),
        ("Halloween", 10, 31),
        ("Thanksgiving", 11, 24),
        ("Christmas", 12, 25),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut calendar = EventCalendar::new();
    for (name, m, d) in holidays {
        for day in SynthEvent::yearly(name, m, d, start, end, 0.0).days {
            calendar.set(day, vec![name.to_string()]).expect("one event per date");
        }
    }
    let mut series = Vec::with_capacity(n_products);

    for p in 0..n_products {
        let level = rng.random_range(20.0..120.0);
        let mut spec = SynthSpec::new(&format!("FOODS_3_{:03}", p + 1), start, days, level);
        spec.slope = rng.random_range(-0.01..0.02);
        let weekend = level * rng.random_range(0.05..0.3);
        spec.weekly = [
            -weekend * 0.4,
            -weekend * 0.5,
            -weekend * 0.5,
            -weekend * 0.3,
            weekend * 0.2,
            weekend,
            weekend * 0.5,
        ];
        spec.yearly_amplitude = level * rng.random_range(0.0..0.3);
        spec.yearly_phase = rng.random_range(0.0..std::f64::consts::TAU);
        spec.noise_sd = level * rng.random_range(0.08..0.25);
        spec.random_walk_sd = level * rng.random_range(0.0..0.01);
        spec.round = true;
        spec.seed = rng.random();
        for (name, m, d) in holidays {
            let effect = level * rng.random_range(-0.5..0.6);
            spec.events.push(SynthEvent::yearly(name, m, d, start, end, effect));
        }
        series.push(spec.generate());
    }
    SynthDataset { series, calendar }
}
