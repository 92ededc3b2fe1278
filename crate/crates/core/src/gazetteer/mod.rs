//! Offline city coordinates, great-circle distance, nearby-city search, time
//! parsing and user-info synthesis.

mod synth;
mod time;

pub use synth::{
    synthesize_location, synthesize_time_periods, synthesize_user_info, NEARBY_RADIUS_KM,
};
pub use time::{parse_time_tokens, period_middle, resolve_time, TimePeriod};

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

const BUNDLED: &str = include_str!("../../data/gazetteer.tsv");

const ALIASES: &[(&str, &str)] = &[
    ("ny", "New York,NY"),
    ("nyc", "New York,NY"),
    ("new york city", "New York,NY"),
    ("la", "Los Angeles,CA"),
    ("sf", "San Francisco,CA"),
    ("dc", "Washington,DC"),
    ("washington dc", "Washington,DC"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct City {
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
}

impl City {
    pub fn new(name: impl Into<String>, latitude: f64, longitude: f64) -> Result<Self> {
        let name = name.into();
        if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::Argument(format!(
                "coordinates of {name} out of range: ({latitude}, {longitude})"
            )));
        }
        Ok(City {
            name,
            latitude,
            longitude,
        })
    }

    /// Name without the trailing `,STATE` part.
    pub fn bare_name(&self) -> &str {
        self.name.split(',').next().unwrap_or(&self.name).trim()
    }
}

impl fmt::Display for City {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Haversine distance in kilometres.
pub fn geo_distance(a: &City, b: &City) -> f64 {
    let (la1, la2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dlat = la2 - la1;
    let dlon = (b.longitude - a.longitude).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Lowercases, collapses whitespace and drops spaces around commas, so
/// `"Brooklyn, NY"` and `"brooklyn,ny"` share a key.
pub fn normalize_name(name: &str) -> String {
    let lower = name.to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    words.join(" ").replace(" ,", ",").replace(", ", ",")
}

#[derive(Clone, Debug)]
pub struct Gazetteer {
    cities: Vec<City>,
    full: HashMap<String, usize>,
    bare: HashMap<String, usize>,
}

impl Gazetteer {
    pub fn new(cities: Vec<City>) -> Result<Self> {
        let mut full = HashMap::new();
        let mut bare: HashMap<String, usize> = HashMap::new();
        let mut ambiguous = Vec::new();
        for (i, c) in cities.iter().enumerate() {
            if full.insert(normalize_name(&c.name), i).is_some() {
                return Err(Error::Config(format!("duplicate city {}", c.name)));
            }
            if bare.insert(normalize_name(c.bare_name()), i).is_some() {
                ambiguous.push(normalize_name(c.bare_name()));
            }
        }
        // A bare name shared by two cities cannot be resolved without a state.
        for key in ambiguous {
            bare.remove(&key);
        }
        Ok(Gazetteer { cities, full, bare })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled gazetteer is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cities = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(parse_err(format!(
                    "expected 3 fields, found {}",
                    fields.len()
                )));
            }
            let coord = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("bad coordinate {s:?}: {e}")))
            };
            let city = City::new(fields[0].trim(), coord(fields[1])?, coord(fields[2])?)
                .map_err(|e| parse_err(e.to_string()))?;
            cities.push(city);
        }
        Self::new(cities)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn cities(&self) -> &[City] {
        &self.cities
    }

    pub fn len(&self) -> usize {
        self.cities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cities.is_empty()
    }

    /// Resolves a city by full name, bare name or a common abbreviation.
    pub fn lookup(&self, name: &str) -> Option<&City> {
        let key = normalize_name(name);
        if let Some(&i) = self.full.get(&key) {
            return Some(&self.cities[i]);
        }
        let bare_key = key.split(',').next().unwrap_or(&key);
        if let Some(&i) = self.bare.get(bare_key) {
            return Some(&self.cities[i]);
        }
        ALIASES
            .iter()
            .find(|(alias, _)| *alias == key)
            .and_then(|(_, target)| self.full.get(&normalize_name(target)))
            .map(|&i| &self.cities[i])
    }

    /// Cities other than `name` within `radius_km`, nearest first and then
    /// by name.
    pub fn nearby_cities(&self, name: &str, radius_km: f64) -> Result<Vec<&City>> {
        let center = self
            .lookup(name)
            .ok_or_else(|| Error::Lookup(format!("city {name:?} not in gazetteer")))?;
        let mut found: Vec<(f64, &City)> = self
            .cities
            .iter()
            .filter(|c| c.name != center.name)
            .map(|c| (geo_distance(center, c), c))
            .filter(|(d, _)| *d <= radius_km)
            .collect();
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.name.cmp(&b.1.name)));
        Ok(found.into_iter().map(|(_, c)| c).collect())
    }
}
