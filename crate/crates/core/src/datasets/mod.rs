//! Restaurant session logs to the canonical dataset.
//!
//! Two tab-separated inputs (the grammar is spelled out in
//! `docs/restaurant-format.md`):
//!
//! * catalog: `id  name  quality  service  price  style`
//! * sessions: `timestamp  origin  entry  navigation  end`
//!
//! Each session becomes one round. Its options are the distinct catalogued
//! restaurants that appear in it (entry, navigation trail, end point, in
//! order of first appearance), the chosen option is the end point, and the
//! recommended option is the last navigation suggestion, or the entry point
//! when the trail is empty. Sessions are grouped into users by origin.

pub mod encoding;
pub mod fixture;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Dataset, InteractionRound, OptionContext, UserContext, UserId, UserRecord};
use crate::seed;

pub use encoding::{encode_option, Level, Price, RestaurantRecord, Style, OPTION_DIM};

pub const MAX_OPTIONS: usize = 18;
pub const MIN_ROUNDS: usize = 3;
pub const MAX_ROUNDS: usize = 105;
pub const N_TRAIN: usize = 188;
pub const N_TEST: usize = 75;

/// A skipped input line or dropped session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reject {
    pub source: String,
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    pub restaurants: BTreeMap<u64, (String, RestaurantRecord)>,
}

pub fn parse_catalog(text: &str, source: &str, rejects: &mut Vec<Reject>) -> Catalog {
    let mut catalog = Catalog::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_catalog_line(line) {
            Ok((id, name, rec)) => {
                if catalog.restaurants.insert(id, (name, rec)).is_some() {
                    rejects.push(Reject {
                        source: source.to_string(),
                        line: i + 1,
                        reason: format!("duplicate restaurant id {id}; later entry kept"),
                    });
                }
            }
            Err(e) => {
                log::warn!("{source}:{}: {e}", i + 1);
                rejects.push(Reject {
                    source: source.to_string(),
                    line: i + 1,
                    reason: e.to_string(),
                });
            }
        }
    }
    catalog
}

fn parse_catalog_line(line: &str) -> Result<(u64, String, RestaurantRecord)> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 && fields.len() != 6 {
        return Err(Error::invalid(format!("expected 6 tab-separated fields, found {}", fields.len())));
    }
    let id = parse_id(fields[0])?;
    let style = match fields.get(5).map(|s| s.trim()) {
        None | Some("") => Style::Unlabeled,
        Some(s) => s.parse()?,
    };
    Ok((
        id,
        fields[1].trim().to_string(),
        RestaurantRecord {
            food_quality: fields[2].parse()?,
            service_level: fields[3].parse()?,
            price: fields[4].parse()?,
            style,
        },
    ))
}

fn parse_id(s: &str) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("bad restaurant id '{}'", s.trim())))
}

/// Restaurant id of a trail token such as `123L` (the trailing letters name
/// the navigation operation and are ignored).
fn parse_token(tok: &str) -> Result<u64> {
    let digits = tok.trim_end_matches(|c: char| c.is_ascii_alphabetic());
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::invalid(format!("bad trail token '{tok}'")));
    }
    parse_id(digits)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub timestamp: String,
    pub origin: String,
    pub entry: u64,
    pub navigation: Vec<u64>,
    pub end: Option<u64>,
    pub source: usize,
    pub line: usize,
}

pub fn parse_session_line(line: &str) -> Result<Session> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(Error::invalid(format!("expected 5 tab-separated fields, found {}", fields.len())));
    }
    let origin = fields[1].trim();
    if origin.is_empty() {
        return Err(Error::invalid("empty origin"));
    }
    let navigation = fields[3]
        .split_whitespace()
        .map(parse_token)
        .collect::<Result<Vec<_>>>()?;
    let end = match fields[4].trim() {
        "" | "-" => None,
        s => Some(parse_token(s)?).filter(|id| *id != 0),
    };
    Ok(Session {
        timestamp: fields[0].trim().to_string(),
        origin: origin.to_string(),
        entry: parse_token(fields[2].trim())?,
        navigation,
        end,
        source: 0,
        line: 0,
    })
}

/// How the recommended option of a round was identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendedFrom {
    LastSuggestion,
    EntryPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundProvenance {
    pub user_id: UserId,
    pub round_index: usize,
    pub source: String,
    pub line: usize,
    pub recommended_from: RecommendedFrom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub dataset: Dataset,
    pub rejects: Vec<Reject>,
    /// Session origin of every user id.
    pub origins: BTreeMap<UserId, String>,
    pub rounds: Vec<RoundProvenance>,
}

impl Ingested {
    pub fn rejects_log(&self) -> String {
        self.rejects
            .iter()
            .map(|r| format!("{}:{}\t{}\n", r.source, r.line, r.reason))
            .collect()
    }
}

/// Parse a catalog and any number of session files, given as
/// `(name, contents)` pairs.
pub fn parse_sessions(catalog: (&str, &str), sessions: &[(&str, &str)]) -> Result<Ingested> {
    let mut rejects = Vec::new();
    let cat = parse_catalog(catalog.1, catalog.0, &mut rejects);
    if cat.restaurants.is_empty() {
        return Err(Error::invalid(format!("catalog {} has no usable entries", catalog.0)));
    }

    let parsed: Vec<(Vec<Session>, Vec<Reject>)> = sessions
        .par_iter()
        .enumerate()
        .map(|(src, (name, text))| {
            let mut ok = Vec::new();
            let mut bad = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() || line.starts_with('#') {
                    continue;
                }
                match parse_session_line(line) {
                    Ok(mut s) => {
                        s.source = src;
                        s.line = i + 1;
                        ok.push(s);
                    }
                    Err(e) => bad.push(Reject {
                        source: name.to_string(),
                        line: i + 1,
                        reason: e.to_string(),
                    }),
                }
            }
            (ok, bad)
        })
        .collect();
    let mut all = Vec::new();
    for (ok, bad) in parsed {
        all.extend(ok);
        rejects.extend(bad);
    }
    all.sort_by(|a, b| {
        (&a.origin, &a.timestamp, a.source, a.line).cmp(&(&b.origin, &b.timestamp, b.source, b.line))
    });

    let reject = |s: &Session, reason: String| Reject {
        source: sessions[s.source].0.to_string(),
        line: s.line,
        reason,
    };

    let mut by_origin: BTreeMap<String, Vec<(InteractionRound, RoundProvenance)>> = BTreeMap::new();
    for s in &all {
        let Some(end) = s.end else {
            rejects.push(reject(s, "session has no end point".into()));
            continue;
        };
        let mut seen = BTreeSet::new();
        let mut ids = Vec::new();
        for id in std::iter::once(s.entry).chain(s.navigation.iter().copied()).chain(std::iter::once(end)) {
            if cat.restaurants.contains_key(&id) && seen.insert(id) {
                ids.push(id);
            }
        }
        if !cat.restaurants.contains_key(&end) {
            rejects.push(reject(s, format!("end point {end} is not in the catalog")));
            continue;
        }
        if ids.len() < 2 {
            rejects.push(reject(s, "fewer than 2 distinct restaurants".into()));
            continue;
        }
        if ids.len() > MAX_OPTIONS {
            rejects.push(reject(s, format!("{} options exceed the limit of {MAX_OPTIONS}", ids.len())));
            continue;
        }
        let (rec_id, from) = match s.navigation.iter().rev().find(|id| cat.restaurants.contains_key(id)) {
            Some(id) => (*id, RecommendedFrom::LastSuggestion),
            None if cat.restaurants.contains_key(&s.entry) => (s.entry, RecommendedFrom::EntryPoint),
            None => {
                rejects.push(reject(s, "no catalogued suggestion or entry point".into()));
                continue;
            }
        };
        let pos = |id: u64| ids.iter().position(|x| *x == id).expect("id listed");
        let round = InteractionRound {
            user_id: 0,
            round_index: 0,
            options: ids.iter().map(|id| encode_option(&cat.restaurants[id].1)).collect::<Vec<OptionContext>>(),
            recommended: pos(rec_id),
            chosen: pos(end),
        };
        let prov = RoundProvenance {
            user_id: 0,
            round_index: 0,
            source: sessions[s.source].0.to_string(),
            line: s.line,
            recommended_from: from,
        };
        by_origin.entry(s.origin.clone()).or_default().push((round, prov));
    }

    let mut users = Vec::new();
    let mut origins = BTreeMap::new();
    let mut provenance = Vec::new();
    for (origin, rounds) in by_origin {
        if !(MIN_ROUNDS..=MAX_ROUNDS).contains(&rounds.len()) {
            rejects.push(Reject {
                source: "users".into(),
                line: 0,
                reason: format!("origin {origin}: {} rounds outside [{MIN_ROUNDS}, {MAX_ROUNDS}]", rounds.len()),
            });
            continue;
        }
        let user_id = users.len() as UserId + 1;
        let mut out = Vec::with_capacity(rounds.len());
        for (t, (mut r, mut p)) in rounds.into_iter().enumerate() {
            r.user_id = user_id;
            r.round_index = t + 1;
            p.user_id = user_id;
            p.round_index = t + 1;
            out.push(r);
            provenance.push(p);
        }
        origins.insert(user_id, origin);
        users.push(UserRecord {
            user_id,
            context: UserContext { features: vec![1.0] },
            rounds: out,
        });
    }
    let dataset = Dataset {
        d: OPTION_DIM,
        big_d: 1,
        users,
    };
    dataset.validate()?;
    Ok(Ingested {
        dataset,
        rejects,
        origins,
        rounds: provenance,
    })
}

/// Read and parse files from disk. Source names in rejects are the file
/// names.
pub fn ingest_files(catalog: &Path, sessions: &[&Path]) -> Result<Ingested> {
    let name = |p: &Path| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
    let cat_text = fs::read_to_string(catalog)?;
    let texts = sessions
        .iter()
        .map(|p| Ok((name(p), fs::read_to_string(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<(&str, &str)> = texts.iter().map(|(n, t)| (n.as_str(), t.as_str())).collect();
    parse_sessions((&name(catalog), &cat_text), &refs)
}

/// Seeded disjoint split; surplus users are discarded.
pub fn split_users(data: &Dataset, n_train: usize, n_test: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if data.users.len() < n_train + n_test {
        return Err(Error::invalid(format!(
            "split needs {} users ({n_train} train + {n_test} test), dataset has {}",
            n_train + n_test,
            data.users.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.users.len()).collect();
    order.shuffle(&mut seed::rng(seed, "user-split", 0));
    let take = |idx: &[usize]| {
        let mut users: Vec<UserRecord> = idx.iter().map(|&i| data.users[i].clone()).collect();
        users.sort_by_key(|u| u.user_id);
        Dataset {
            d: data.d,
            big_d: data.big_d,
            users,
        }
    };
    Ok((take(&order[..n_train]), take(&order[n_train..n_train + n_test])))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CATALOG: &str = "1\tA\tgood\tfair\tbelow $15\tasian\n\
        2\tB\texcellent\tgood\t$15-$30\tlatin\n\
        3\tC\tfair\tfair\t$30-$50\n\
        4\tD\tnear-perfect\texcellent\tover $50\tamerican\n\
        5\tE\tsuperb\tgood\tbelow $15\tasian\n";

    #[test]
    fn catalog_rejects_unknown_levels() {
        let mut rejects = Vec::new();
        let cat = parse_catalog(CATALOG, "cat", &mut rejects);
        assert_eq!(cat.restaurants.len(), 4);
        assert_eq!(rejects.len(), 1);
        assert_eq!(rejects[0].line, 5);
        assert_eq!(cat.restaurants[&3].1.style, Style::Unlabeled);
    }

    #[test]
    fn session_becomes_round() {
        let sessions = "t1\tip1\t1L\t2M 3N\t4\n\
            t2\tip1\t2\t\t1\n\
            t3\tip1\t3L\t1L 3L\t1\n\
            bad line\n\
            t4\tip2\t1\t2\t0\n\
            t5\tip2\t1\t2\t2\n";
        let out = parse_sessions(("cat", CATALOG), &[("s", sessions)]).unwrap();
        assert_eq!(out.dataset.users.len(), 1);
        let rounds = &out.dataset.users[0].rounds;
        assert_eq!(rounds.len(), 3);
        // options in order of appearance; end point chosen; last suggestion recommended
        assert_eq!(rounds[0].options.len(), 4);
        assert_eq!((rounds[0].chosen, rounds[0].recommended), (3, 2));
        assert_eq!((rounds[1].chosen, rounds[1].recommended), (1, 0));
        assert_eq!(out.rounds[1].recommended_from, RecommendedFrom::EntryPoint);
        assert_eq!(rounds[2].options.len(), 2);
        assert_eq!((rounds[2].chosen, rounds[2].recommended), (1, 0));
        assert_eq!(out.dataset.d, 9);
        // bad catalog entry, malformed line, session without end point, user ip2
        // with too few rounds
        assert_eq!(out.rejects.len(), 4, "{:?}", out.rejects);
        assert_eq!(out.origins[&1], "ip1");
    }

    #[test]
    fn single_restaurant_and_oversized_sessions_dropped() {
        let mut catalog = String::new();
        for id in 1..=25 {
            catalog.push_str(&format!("{id}\tR\tgood\tgood\t$15-$30\tother\n"));
        }
        let trail: Vec<String> = (2..=20).map(|i| format!("{i}L")).collect();
        let sessions = format!(
            "t1\tip\t1\t1L\t1\nt2\tip\t1\t{}\t21\nt3\tip\t1\t2L\t2\nt4\tip\t1\t2L\t1\nt5\tip\t3\t4L\t4\n",
            trail.join(" ")
        );
        let out = parse_sessions(("cat", &catalog), &[("s", &sessions)]).unwrap();
        let rounds = &out.dataset.users[0].rounds;
        assert_eq!(rounds.len(), 3);
        assert!(rounds.iter().all(|r| (2..=MAX_OPTIONS).contains(&r.num_options())));
        assert_eq!(out.rejects.len(), 2);
    }

    #[test]
    fn merge_order_is_input_order_independent() {
        let a = "t2\tip\t1\t2L\t2\nt1\tip\t2\t3L\t3\n";
        let b = "t3\tip\t3\t4L\t4\n";
        let one = parse_sessions(("cat", CATALOG), &[("a", a), ("b", b)]).unwrap();
        let two = parse_sessions(("cat", CATALOG), &[("b", b), ("a", a)]).unwrap();
        assert_eq!(one.dataset, two.dataset);
        assert_eq!(one.dataset.users[0].rounds[0].chosen, 1);
    }

    #[test]
    fn split_counts_and_determinism() {
        let users = (1..=300)
            .map(|i| UserRecord {
                user_id: i,
                context: UserContext { features: vec![1.0] },
                rounds: vec![],
            })
            .collect();
        let data = Dataset { d: 9, big_d: 1, users };
        let (train, test) = split_users(&data, N_TRAIN, N_TEST, 3).unwrap();
        assert_eq!((train.users.len(), test.users.len()), (188, 75));
        let ids: BTreeSet<_> = train.users.iter().map(|u| u.user_id).collect();
        assert!(test.users.iter().all(|u| !ids.contains(&u.user_id)));
        assert_eq!(split_users(&data, N_TRAIN, N_TEST, 3).unwrap(), (train, test));
        assert!(split_users(&data, 250, 75, 3).is_err());
    }
}
