use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Component within a layer whose output is added to the residual stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Site {
    Head(usize),
    Mlp,
}

/// A computational node: one attention head or MLP at one token position.
/// Rendered as `P14L0H1` or `P14L1MLP`, which is also its serialized form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub position: usize,
    pub layer: usize,
    pub site: Site,
}

impl NodeId {
    pub fn head(position: usize, layer: usize, head: usize) -> Self {
        NodeId {
            position,
            layer,
            site: Site::Head(head),
        }
    }

    pub fn mlp(position: usize, layer: usize) -> Self {
        NodeId {
            position,
            layer,
            site: Site::Mlp,
        }
    }

    pub fn is_head(&self) -> bool {
        matches!(self.site, Site::Head(_))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.site {
            Site::Head(h) => write!(f, "P{}L{}H{}", self.position, self.layer, h),
            Site::Mlp => write!(f, "P{}L{}MLP", self.position, self.layer),
        }
    }
}

impl FromStr for NodeId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::BadNode {
            node: s.to_string(),
        };
        let rest = s.strip_prefix('P').ok_or_else(bad)?;
        let (p, rest) = rest.split_once('L').ok_or_else(bad)?;
        let position = p.parse().map_err(|_| bad())?;
        if let Some(l) = rest.strip_suffix("MLP") {
            return Ok(NodeId::mlp(position, l.parse().map_err(|_| bad())?));
        }
        let (l, h) = rest.split_once('H').ok_or_else(bad)?;
        Ok(NodeId::head(
            position,
            l.parse().map_err(|_| bad())?,
            h.parse().map_err(|_| bad())?,
        ))
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Replaces a node's residual contribution. `row` selects one batch row;
/// `None` applies the patch to every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub node: NodeId,
    pub row: Option<usize>,
    pub value: Vec<f32>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_round_trip() {
        for node in [NodeId::head(14, 0, 1), NodeId::mlp(3, 2)] {
            assert_eq!(node.to_string().parse::<NodeId>().unwrap(), node);
        }
        assert_eq!(NodeId::head(14, 0, 1).to_string(), "P14L0H1");
        assert_eq!(NodeId::mlp(9, 1).to_string(), "P9L1MLP");
        assert!("P1X0".parse::<NodeId>().is_err());
        let json = serde_json::to_string(&NodeId::mlp(9, 1)).unwrap();
        assert_eq!(json, "\"P9L1MLP\"");
        assert_eq!(
            serde_json::from_str::<NodeId>(&json).unwrap(),
            NodeId::mlp(9, 1)
        );
    }
}
