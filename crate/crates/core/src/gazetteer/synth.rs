use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::time::{parse_time_tokens, TimePeriod};
use super::Gazetteer;
use crate::corpus::{UserInfoEntry, Utterance};

pub const NEARBY_RADIUS_KM: f64 = 50.0;

/// A random city within 50 km of the utterance's departure city, as a `loc`
/// entry. `None` when there is no `fromloc` slot, the city is unknown or it
/// has no neighbours.
pub fn synthesize_location<R: Rng + ?Sized>(
    u: &Utterance,
    gazetteer: &Gazetteer,
    rng: &mut R,
) -> Option<UserInfoEntry> {
    let span = u
        .slot_spans()
        .into_iter()
        .find(|s| s.label.contains("fromloc"))?;
    let text = u.span_text(span.start, span.end);
    let near = match gazetteer.nearby_cities(&text, NEARBY_RADIUS_KM) {
        Ok(near) => near,
        Err(_) => {
            log::debug!("no location synthesized: {text:?} not in gazetteer");
            return None;
        }
    };
    match near.choose(rng) {
        Some(city) => Some(UserInfoEntry::new("loc", city.name.clone())),
        None => {
            log::debug!(
                "no location synthesized: nothing within {NEARBY_RADIUS_KM} km of {text:?}"
            );
            None
        }
    }
}

/// Depart and arrive period preferences read off the utterance's time slots.
/// A clock time wins over a period-of-day keyword on the same side.
pub fn synthesize_time_periods(u: &Utterance) -> Vec<UserInfoEntry> {
    let spans = u.slot_spans();
    let mut out = Vec::new();
    for side in ["depart", "arrive"] {
        let clock = spans
            .iter()
            .filter(|s| s.label == format!("{side}_time.time"))
            .find_map(|s| parse_time_tokens(&u.tokens[s.start..s.end]))
            .map(TimePeriod::containing);
        let keyword = || {
            spans
                .iter()
                .filter(|s| s.label == format!("{side}_time.period_of_day"))
                .flat_map(|s| &u.tokens[s.start..s.end])
                .find_map(|t| t.parse::<TimePeriod>().ok())
        };
        if let Some(p) = clock.or_else(keyword) {
            out.push(UserInfoEntry::new(format!("{side}_period"), p.name()));
        }
    }
    out
}

/// Adds synthesized location and time preferences to every utterance.
/// Entries whose type is already present are kept as they are.
pub fn synthesize_user_info(
    data: &[Utterance],
    gazetteer: &Gazetteer,
    seed: u64,
) -> Vec<Utterance> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    data.iter()
        .map(|u| {
            let mut out = u.clone();
            let mut fresh: Vec<UserInfoEntry> = Vec::new();
            fresh.extend(synthesize_location(u, gazetteer, &mut rng));
            fresh.extend(synthesize_time_periods(u));
            for e in fresh {
                if !out.user_info.iter().any(|x| x.info_type == e.info_type) {
                    out.user_info.push(e);
                }
            }
            out
        })
        .collect()
}
