use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Edge-scoring method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gk,
    LinBayes,
    LinBayesAdj,
    Lasso,
    LassoAdj,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Gk, Method::LinBayes, Method::LinBayesAdj, Method::Lasso, Method::LassoAdj];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Gk => "gk",
            Method::LinBayes => "lin-bayes",
            Method::LinBayesAdj => "lin-bayes-adj",
            Method::Lasso => "lasso",
            Method::LassoAdj => "lasso-adj",
        }
    }

    /// Whether the response is the log phospho fraction log(X/U).
    pub fn is_adjusted(&self) -> bool {
        matches!(self, Method::LinBayesAdj | Method::LassoAdj)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}
