//! Synthetic restaurant logs in the ingestion format, used when the real
//! session files are not available.
//!
//! Users belong to taste groups. A group prefers one style and has its own
//! weights on quality, service and price; users add small personal
//! deviations and a positive pull toward the suggested restaurant. Each
//! session shows a few random restaurants and ends at a restaurant drawn
//! from the multinomial-logit model. A handful of deliberately bad lines
//! exercise the rejection paths.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::encoding::{encode_option, Level, Price, RestaurantRecord, Style};
use crate::choice;
use crate::error::Result;
use crate::model::PreferenceVector;
use crate::seed::{self, Rng};

pub const CATALOG_FILE: &str = "catalog.tsv";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureConfig {
    pub users: usize,
    pub catalog_size: usize,
    pub groups: usize,
    pub min_rounds: usize,
    pub max_rounds: usize,
    pub max_options: usize,
    pub session_files: usize,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            users: 320,
            catalog_size: 240,
            groups: 8,
            min_rounds: 3,
            max_rounds: 24,
            max_options: 8,
            session_files: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureFiles {
    pub catalog: String,
    /// `(file name, contents)` pairs.
    pub sessions: Vec<(String, String)>,
}

fn pick<T: Copy>(rng: &mut Rng, all: &[T]) -> T {
    all[rng.random_range(0..all.len())]
}

fn group_theta(rng: &mut Rng, g: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
    let favourite = g % 5;
    for s in 0..6 {
        w.push(if s == favourite { 3.0 } else { rng.random_range(-1.0..1.0) });
    }
    w
}

pub fn generate(cfg: &FixtureConfig, seed: u64) -> FixtureFiles {
    let mut rng = seed::rng(seed, "fixture-catalog", 0);
    let records: Vec<RestaurantRecord> = (0..cfg.catalog_size)
        .map(|_| RestaurantRecord {
            food_quality: pick(&mut rng, &Level::ALL),
            service_level: pick(&mut rng, &Level::ALL),
            price: pick(&mut rng, &Price::ALL),
            style: if rng.random_bool(0.05) {
                Style::Unlabeled
            } else {
                pick(&mut rng, &Style::ALL[..5])
            },
        })
        .collect();
    let mut catalog = String::from("# id\tname\tquality\tservice\tprice\tstyle\n");
    for (i, r) in records.iter().enumerate() {
        let _ = writeln!(
            catalog,
            "{}\tRestaurant {}\t{}\t{}\t{}\t{}",
            i + 1,
            i + 1,
            r.food_quality,
            r.service_level,
            r.price,
            r.style
        );
    }
    // an entry with an unknown quality label
    let _ = writeln!(catalog, "{}\tBroken\tsuperb\tgood\t$15-$30\tasian", cfg.catalog_size + 1);
    let encoded: Vec<_> = records.iter().map(encode_option).collect();

    let mut grng = seed::rng(seed, "fixture-groups", 0);
    let groups: Vec<Vec<f64>> = (0..cfg.groups).map(|g| group_theta(&mut grng, g)).collect();
    let jitter = Normal::new(0.0, 0.3).expect("valid normal");
    let letters = ['L', 'M', 'N', 'O', 'P', 'Q', 'R', 'S', 'T'];

    let mut files = vec![String::new(); cfg.session_files.max(1)];
    for u in 0..cfg.users {
        let mut rng = seed::rng(seed, "fixture-user", u as u64);
        let g = rng.random_range(0..cfg.groups);
        let mut w: Vec<f64> = groups[g].iter().map(|v| v + jitter.sample(&mut rng)).collect();
        w.push(rng.random_range(0.0..1.5));
        let theta = PreferenceVector::new(w).expect("finite");
        let origin = format!("10.{}.{}.{}", u / 65536, (u / 256) % 256, u % 256);
        let rounds = rng.random_range(cfg.min_rounds..=cfg.max_rounds);
        let n_files = files.len();
        let out = &mut files[u % n_files];
        for t in 0..rounds {
            let a = rng.random_range(2..=cfg.max_options);
            let ids: Vec<usize> = index::sample(&mut rng, cfg.catalog_size, a).into_vec();
            let options: Vec<_> = ids.iter().map(|&i| encoded[i].clone()).collect();
            let rec = a - 1;
            let probs = choice::softmax(&choice::utilities(&theta, &options, Some(rec)).expect("dims"))
                .expect("finite");
            let end = ids[probs.sample_with(rng.random())] + 1;
            let trail: Vec<String> = ids[1..]
                .iter()
                .map(|&i| format!("{}{}", i + 1, letters[rng.random_range(0..letters.len())]))
                .collect();
            let _ = writeln!(
                out,
                "1996-09-{:02}T{:02}:{:02}:00\t{origin}\t{}\t{}\t{end}",
                1 + t / 24,
                t % 24,
                u % 60,
                ids[0] + 1,
                trail.join(" ")
            );
        }
    }

    // rejection paths: malformed, no end point, too many options, too few rounds
    let first = &mut files[0];
    first.push_str("not a session line\n");
    first.push_str("1996-09-01T00:00:00\t10.255.0.1\t1L\t2L 3L\t0\n");
    let long: Vec<String> = (2..=20).map(|i| format!("{i}L")).collect();
    let _ = writeln!(first, "1996-09-01T00:00:00\t10.255.0.2\t1L\t{}\t5", long.join(" "));
    first.push_str("1996-09-01T00:00:00\t10.255.0.3\t1L\t2L\t2\n");

    FixtureFiles {
        catalog,
        sessions: files
            .into_iter()
            .enumerate()
            .map(|(i, text)| (format!("sessions-{}.tsv", i + 1), text))
            .collect(),
    }
}

/// Write the fixture into `dir`; returns `(catalog path, session paths)`.
pub fn write(dir: &Path, cfg: &FixtureConfig, seed: u64) -> Result<(PathBuf, Vec<PathBuf>)> {
    fs::create_dir_all(dir)?;
    let files = generate(cfg, seed);
    let catalog = dir.join(CATALOG_FILE);
    fs::write(&catalog, &files.catalog)?;
    let mut sessions = Vec::new();
    for (name, text) in &files.sessions {
        let p = dir.join(name);
        fs::write(&p, text)?;
        sessions.push(p);
    }
    Ok((catalog, sessions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{parse_sessions, MAX_OPTIONS, MAX_ROUNDS, MIN_ROUNDS};

    #[test]
    fn fixture_ingests_with_expected_shape() {
        let files = generate(&FixtureConfig::default(), 0);
        let refs: Vec<(&str, &str)> = files.sessions.iter().map(|(n, t)| (n.as_str(), t.as_str())).collect();
        let out = parse_sessions((CATALOG_FILE, &files.catalog), &refs).unwrap();
        let data = &out.dataset;
        assert!(data.users.len() >= 263, "{}", data.users.len());
        for u in &data.users {
            assert!((MIN_ROUNDS..=MAX_ROUNDS).contains(&u.rounds.len()));
            for r in &u.rounds {
                assert!((2..=MAX_OPTIONS).contains(&r.num_options()));
                assert_eq!(r.options[0].dim(), 9);
            }
        }
        // catalog entry, malformed line, missing end, oversized session, short user
        assert_eq!(out.rejects.len(), 5, "{:#?}", out.rejects);
        assert_eq!(generate(&FixtureConfig::default(), 0), files);
    }
}
