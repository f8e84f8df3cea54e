//! Canonical dataset interchange format.
//!
//! ```json
//! {"d": 2, "D": 9, "users": [
//!   {"user_id": 7, "context": [1, 0, ...],
//!    "rounds": [{"options": [[100, 100], [104.3, 92.0]], "recommended": 1, "chosen": 2}]}
//! ]}
//! ```
//!
//! Option indices are 1-based on disk and 0-based in memory. Round order in
//! the file is the user's round order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, InteractionRound, OptionContext, UserContext, UserId, UserRecord};

#[derive(Serialize, Deserialize)]
struct FileDataset {
    d: usize,
    #[serde(rename = "D")]
    big_d: usize,
    users: Vec<FileUser>,
}

#[derive(Serialize, Deserialize)]
struct FileUser {
    user_id: UserId,
    context: Vec<f64>,
    rounds: Vec<FileRound>,
}

#[derive(Serialize, Deserialize)]
struct FileRound {
    options: Vec<Vec<f64>>,
    recommended: usize,
    chosen: usize,
}

fn to_file(data: &Dataset) -> FileDataset {
    FileDataset {
        d: data.d,
        big_d: data.big_d,
        users: data
            .users
            .iter()
            .map(|u| FileUser {
                user_id: u.user_id,
                context: u.context.features.clone(),
                rounds: u
                    .rounds
                    .iter()
                    .map(|r| FileRound {
                        options: r.options.iter().map(|o| o.features.clone()).collect(),
                        recommended: r.recommended + 1,
                        chosen: r.chosen + 1,
                    })
                    .collect(),
            })
            .collect(),
    }
}

fn from_file(file: FileDataset) -> Result<Dataset> {
    let users = file
        .users
        .into_iter()
        .map(|u| {
            let rounds = u
                .rounds
                .into_iter()
                .enumerate()
                .map(|(t, r)| {
                    if r.recommended == 0 || r.chosen == 0 {
                        return Err(Error::invalid(format!(
                            "user {} round {}: indices are 1-based",
                            u.user_id,
                            t + 1
                        )));
                    }
                    Ok(InteractionRound {
                        user_id: u.user_id,
                        round_index: t + 1,
                        options: r.options.into_iter().map(OptionContext::new).collect(),
                        recommended: r.recommended - 1,
                        chosen: r.chosen - 1,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(UserRecord {
                user_id: u.user_id,
                context: UserContext::new(u.context)?,
                rounds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let data = Dataset {
        d: file.d,
        big_d: file.big_d,
        users,
    };
    data.validate()?;
    Ok(data)
}

pub fn dataset_to_json(data: &Dataset) -> Result<String> {
    Ok(serde_json::to_string(&to_file(data))?)
}

pub fn dataset_from_json(text: &str) -> Result<Dataset> {
    from_file(serde_json::from_str(text)?)
}

pub fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, dataset_to_json(data)?)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    dataset_from_json(&fs::read_to_string(path)?)
}
