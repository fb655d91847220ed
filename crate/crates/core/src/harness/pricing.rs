//! Per-model token prices and exact cost arithmetic.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// Picodollars (1e-12 USD), the unit all costs are computed in.
pub type Picodollars = u128;

pub const PICO_PER_USD: u128 = 1_000_000_000_000;

/// Prices in micro-USD per million tokens, which equals picodollars per token.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Price {
    pub input: u64,
    pub output: u64,
}

impl Price {
    /// From USD per million tokens, rounded to the micro-dollar.
    pub fn from_usd(input: f64, output: f64) -> Result<Self, String> {
        let conv = |x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok((x * 1e6).round() as u64)
            } else {
                Err(format!("price {x} is not a non-negative number"))
            }
        };
        Ok(Price {
            input: conv(input)?,
            output: conv(output)?,
        })
    }

    pub fn cost(&self, tokens_in: u64, tokens_out: u64) -> Picodollars {
        u128::from(tokens_in) * u128::from(self.input)
            + u128::from(tokens_out) * u128::from(self.output)
    }

    pub fn input_cost(&self, tokens_in: u64) -> Picodollars {
        self.cost(tokens_in, 0)
    }
}

#[derive(Serialize, Deserialize)]
struct PriceUsd {
    input: f64,
    output: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PricingTable {
    models: IndexMap<String, Price>,
}

#[derive(Debug, thiserror::Error)]
pub enum PricingError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("pricing file: {0}")]
    Format(String),
}

impl Default for PricingTable {
    /// USD per million input and output tokens for the four reference models.
    fn default() -> Self {
        let rows = [
            ("GPT4o", 2.5, 10.0),
            ("Claude 3.0 Opus", 15.0, 75.0),
            ("Gemini 1.5 Pro", 1.25, 5.0),
            ("Llama 3.1 405B", 2.4, 2.4),
        ];
        PricingTable {
            models: rows
                .into_iter()
                .map(|(m, i, o)| (m.to_owned(), Price::from_usd(i, o).expect("valid defaults")))
                .collect(),
        }
    }
}

impl PricingTable {
    pub fn get(&self, model: &str) -> Option<Price> {
        self.models.get(model).copied()
    }

    pub fn models(&self) -> impl Iterator<Item = (&str, Price)> {
        self.models.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn insert(&mut self, model: impl Into<String>, price: Price) {
        self.models.insert(model.into(), price);
    }

    /// Parses `{"model": {"input": usd, "output": usd}, ...}`.
    pub fn from_json(text: &str) -> Result<Self, PricingError> {
        let raw: IndexMap<String, PriceUsd> =
            serde_json::from_str(text).map_err(|e| PricingError::Format(e.to_string()))?;
        let mut models = IndexMap::new();
        for (k, v) in raw {
            let price = Price::from_usd(v.input, v.output)
                .map_err(|e| PricingError::Format(format!("{k}: {e}")))?;
            models.insert(k, price);
        }
        Ok(PricingTable { models })
    }

    pub fn load(path: &Path) -> Result<Self, PricingError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let raw: IndexMap<&str, PriceUsd> = self
            .models
            .iter()
            .map(|(k, p)| {
                (
                    k.as_str(),
                    PriceUsd {
                        input: p.input as f64 / 1e6,
                        output: p.output as f64 / 1e6,
                    },
                )
            })
            .collect();
        serde_json::to_string_pretty(&raw).expect("plain values serialize")
    }
}

/// Picodollars as USD with up to 12 decimals and no trailing zeros beyond cents.
pub fn format_usd(p: Picodollars) -> String {
    let whole = p / PICO_PER_USD;
    let frac = format!("{:012}", p % PICO_PER_USD);
    let trimmed = frac.trim_end_matches('0');
    let frac = if trimmed.len() < 2 {
        &frac[..2]
    } else {
        trimmed
    };
    format!("{whole}.{frac}")
}
