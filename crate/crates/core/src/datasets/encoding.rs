//! Restaurant attributes and their 9-dimensional option encoding:
//! `[quality, service, price, style one-hot (6)]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OptionContext;

pub const OPTION_DIM: usize = 9;

/// Shared five-level scale of food quality and service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Fair,
    Good,
    Excellent,
    Extraordinary,
    NearPerfect,
}

impl Level {
    pub const ALL: [Level; 5] = [
        Level::Fair,
        Level::Good,
        Level::Excellent,
        Level::Extraordinary,
        Level::NearPerfect,
    ];

    pub fn value(self) -> f64 {
        match self {
            Level::Fair => 0.0,
            Level::Good => 0.25,
            Level::Excellent => 0.5,
            Level::Extraordinary => 0.75,
            Level::NearPerfect => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Level::Fair => "fair",
            Level::Good => "good",
            Level::Excellent => "excellent",
            Level::Extraordinary => "extraordinary",
            Level::NearPerfect => "near-perfect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Price {
    Below15,
    From15To30,
    From30To50,
    Over50,
}

impl Price {
    pub const ALL: [Price; 4] = [Price::Below15, Price::From15To30, Price::From30To50, Price::Over50];

    /// The rounded grid (0, 0.33, 0.67, 1), not exact thirds.
    pub fn value(self) -> f64 {
        match self {
            Price::Below15 => 0.0,
            Price::From15To30 => 0.33,
            Price::From30To50 => 0.67,
            Price::Over50 => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Price::Below15 => "below $15",
            Price::From15To30 => "$15-$30",
            Price::From30To50 => "$30-$50",
            Price::Over50 => "over $50",
        }
    }
}

/// Style categories. `Unlabeled` fills the sixth slot for restaurants
/// without a style entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Style {
    American,
    Asian,
    Latin,
    MiddleEastern,
    Other,
    Unlabeled,
}

impl Style {
    pub const ALL: [Style; 6] = [
        Style::American,
        Style::Asian,
        Style::Latin,
        Style::MiddleEastern,
        Style::Other,
        Style::Unlabeled,
    ];

    pub fn slot(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Style::American => "american",
            Style::Asian => "asian",
            Style::Latin => "latin",
            Style::MiddleEastern => "middle eastern",
            Style::Other => "other",
            Style::Unlabeled => "",
        }
    }
}

fn parse_label<T: Copy>(all: &[T], label: fn(T) -> &'static str, s: &str, what: &str) -> Result<T> {
    let key = s.trim().to_ascii_lowercase();
    all.iter()
        .copied()
        .find(|v| label(*v) == key)
        .ok_or_else(|| Error::invalid(format!("unknown {what} '{}'", s.trim())))
}

impl FromStr for Level {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_label(&Level::ALL, Level::label, s, "level")
    }
}

impl FromStr for Price {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_label(&Price::ALL, Price::label, s, "price")
    }
}

impl FromStr for Style {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_label(&Style::ALL, Style::label, s, "style")
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestaurantRecord {
    pub food_quality: Level,
    pub service_level: Level,
    pub price: Price,
    pub style: Style,
}

pub fn encode_option(r: &RestaurantRecord) -> OptionContext {
    let mut v = vec![0.0; OPTION_DIM];
    v[0] = r.food_quality.value();
    v[1] = r.service_level.value();
    v[2] = r.price.value();
    v[3 + r.style.slot()] = 1.0;
    OptionContext::new(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_records() -> Vec<RestaurantRecord> {
        let mut out = Vec::new();
        for q in Level::ALL {
            for s in Level::ALL {
                for p in Price::ALL {
                    for st in Style::ALL {
                        out.push(RestaurantRecord {
                            food_quality: q,
                            service_level: s,
                            price: p,
                            style: st,
                        });
                    }
                }
            }
        }
        out
    }

    #[test]
    fn documented_values() {
        assert_eq!("Fair".parse::<Level>().unwrap().value(), 0.0);
        assert_eq!("near-perfect".parse::<Level>().unwrap().value(), 1.0);
        assert_eq!("Below $15".parse::<Price>().unwrap().value(), 0.0);
        assert_eq!("Over $50".parse::<Price>().unwrap().value(), 1.0);
        assert_eq!("$30-$50".parse::<Price>().unwrap().value(), 0.67);
        assert!("superb".parse::<Level>().is_err());
        assert!("Martian".parse::<Style>().is_err());
    }

    #[test]
    fn encoding_is_total_and_injective() {
        let recs = all_records();
        let encoded: Vec<Vec<f64>> = recs.iter().map(|r| encode_option(r).features).collect();
        for e in &encoded {
            assert_eq!(e.len(), OPTION_DIM);
            assert_eq!(e[3..].iter().filter(|v| **v == 1.0).count(), 1);
            assert_eq!(e[3..].iter().sum::<f64>(), 1.0);
        }
        for i in 0..encoded.len() {
            for j in i + 1..encoded.len() {
                assert_ne!(encoded[i], encoded[j]);
            }
        }
    }

    #[test]
    fn labels_round_trip() {
        for l in Level::ALL {
            assert_eq!(l.label().parse::<Level>().unwrap(), l);
        }
        for p in Price::ALL {
            assert_eq!(p.label().parse::<Price>().unwrap(), p);
        }
        for s in Style::ALL {
            assert_eq!(s.label().parse::<Style>().unwrap(), s);
        }
    }
}
