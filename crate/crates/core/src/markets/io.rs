use std::path::Path;

use serde::{Deserialize, Serialize};

use super::demand::{CesBuyer, CesMarket, LeontiefBuyer, LeontiefMarket, Market};
use super::dynamics::OngoingConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum BuyerEntry {
    Ces(CesBuyer),
    Leontief(LeontiefBuyer),
}

/// On-disk market description. Leontief files may omit `goods`; it is then one past the
/// largest good index any buyer names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goods: Option<usize>,
    buyers: Vec<BuyerEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa: Option<Vec<f64>>,
}

impl MarketFile {
    pub fn from_ces(m: &CesMarket, ongoing: Option<&OngoingConfig>) -> Self {
        Self::build(m.buyer_list().iter().cloned().map(BuyerEntry::Ces).collect(), Some(m.buyer_list()[0].a.len()), ongoing)
    }

    pub fn from_leontief(m: &LeontiefMarket, goods: usize, ongoing: Option<&OngoingConfig>) -> Self {
        Self::build(m.buyer_list().iter().cloned().map(BuyerEntry::Leontief).collect(), Some(goods), ongoing)
    }

    fn build(buyers: Vec<BuyerEntry>, goods: Option<usize>, ongoing: Option<&OngoingConfig>) -> Self {
        MarketFile {
            goods,
            buyers,
            chi: ongoing.map(|o| o.chi.clone()),
            v0: ongoing.map(|o| o.v0.clone()),
            lambda: ongoing.map(|o| o.lambda.clone()),
            kappa: ongoing.map(|o| o.kappa.clone()),
        }
    }

    pub fn market(&self) -> Result<Market> {
        let ces: Vec<CesBuyer> =
            self.buyers.iter().filter_map(|b| if let BuyerEntry::Ces(c) = b { Some(c.clone()) } else { None }).collect();
        let leo: Vec<LeontiefBuyer> =
            self.buyers.iter().filter_map(|b| if let BuyerEntry::Leontief(l) = b { Some(l.clone()) } else { None }).collect();
        match (ces.is_empty(), leo.is_empty()) {
            (false, true) => {
                let goods = self.goods.unwrap_or(ces[0].a.len());
                Ok(Market::Ces(CesMarket::new(goods, ces)?))
            }
            (true, false) => {
                let inferred = leo.iter().flat_map(|b| b.goods.iter()).max().map_or(0, |m| m + 1);
                Ok(Market::Leontief(LeontiefMarket::new(self.goods.unwrap_or(inferred), leo)?))
            }
            (true, true) => Err(Error::InvalidInput("market has no buyers".into())),
            (false, false) => Err(Error::InvalidInput("market mixes CES and Leontief buyers".into())),
        }
    }

    /// Warehouse parameters; `κ` defaults to `λ/20` when absent.
    pub fn ongoing(&self) -> Result<Option<OngoingConfig>> {
        match (&self.chi, &self.v0, &self.lambda) {
            (None, None, None) if self.kappa.is_none() => Ok(None),
            (Some(chi), Some(v0), Some(lambda)) => {
                let mut cfg = OngoingConfig::with_default_kappa(chi.clone(), v0.clone(), lambda.clone());
                if let Some(k) = &self.kappa {
                    cfg.kappa = k.clone();
                }
                Ok(Some(cfg))
            }
            _ => Err(Error::InvalidInput("ongoing markets need chi, v0 and lambda together".into())),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("market serializes")
    }
}

pub fn parse_market(text: &str, origin: &str) -> Result<MarketFile> {
    serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))
}

pub fn load_market(path: &Path) -> Result<MarketFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_market(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markets::FisherMarket;

    #[test]
    fn ces_document() {
        let f = parse_market(r#"{"goods": 2, "buyers": [{"e": 1, "rho": -1, "a": [1, 1]}]}"#, "t").unwrap();
        let m = f.market().unwrap();
        assert_eq!((m.kind(), m.goods()), ("ces", 2));
        assert!(f.ongoing().unwrap().is_none());
    }

    #[test]
    fn leontief_document_infers_goods() {
        let f = parse_market(r#"{"buyers": [{"e": 0.6, "S": [0], "b": [1]}, {"e": 0.4, "S": [1], "b": [1]}]}"#, "t").unwrap();
        let m = f.market().unwrap();
        assert_eq!((m.kind(), m.goods()), ("leontief", 2));
    }

    #[test]
    fn ongoing_document() {
        let text = r#"{"goods": 2, "buyers": [{"e": 2, "rho": -1, "a": [1, 1]}],
            "chi": [1, 1], "v0": [0.04, -0.03], "lambda": [0.0166, 0.0166]}"#;
        let cfg = parse_market(text, "t").unwrap().ongoing().unwrap().unwrap();
        assert_eq!(cfg.kappa, vec![0.0166 / 20.0; 2]);
    }

    #[test]
    fn rejects_unknown_and_mixed() {
        assert!(parse_market(r#"{"buyers": [], "extra": 1}"#, "t").is_err());
        let mixed = r#"{"goods": 1, "buyers": [{"e": 1, "rho": -1, "a": [1]}, {"e": 1, "S": [0], "b": [1]}]}"#;
        assert!(parse_market(mixed, "t").unwrap().market().is_err());
        assert!(parse_market(r#"{"goods": 1, "buyers": [{"e": 1, "rho": -1, "a": [1]}], "chi": [1]}"#, "t").unwrap().ongoing().is_err());
    }

    #[test]
    fn round_trip() {
        let f = parse_market(r#"{"goods": 2, "buyers": [{"e": 1.5, "rho": -2, "a": [1, 0.5]}]}"#, "t").unwrap();
        assert_eq!(parse_market(&f.to_json(), "t").unwrap(), f);
    }
}
