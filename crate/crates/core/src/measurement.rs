use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::StateKind;

/// One state slot `x_i[k]` or `r_i[k]`. Ordered by `(node, time, kind)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MeasurementId {
    /// 0-based node index.
    pub node: usize,
    pub time: usize,
    pub kind: StateKind,
}

impl MeasurementId {
    pub fn new(node: usize, time: usize, kind: StateKind) -> Self {
        Self { node, time, kind }
    }

    pub fn x(node: usize, time: usize) -> Self {
        Self::new(node, time, StateKind::X)
    }

    pub fn r(node: usize, time: usize) -> Self {
        Self::new(node, time, StateKind::R)
    }
}

/// Renders as `x_3[5]` with a 1-based node id.
impl fmt::Display for MeasurementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}[{}]", self.kind.symbol(), self.node + 1, self.time)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_is_one_based() {
        assert_eq!(MeasurementId::x(2, 5).to_string(), "x_3[5]");
        assert_eq!(MeasurementId::r(0, 1).to_string(), "r_1[1]");
    }

    #[test]
    fn ordering_is_node_time_kind() {
        let mut v = vec![
            MeasurementId::r(0, 2),
            MeasurementId::x(1, 0),
            MeasurementId::x(0, 2),
            MeasurementId::x(0, 3),
        ];
        v.sort();
        assert_eq!(
            v,
            vec![
                MeasurementId::x(0, 2),
                MeasurementId::r(0, 2),
                MeasurementId::x(0, 3),
                MeasurementId::x(1, 0),
            ]
        );
    }
}
