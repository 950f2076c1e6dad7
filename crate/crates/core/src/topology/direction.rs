use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A movement label attached to an edge.
///
/// Tree edges use `Parent` / `Child(i)` where `i` is the 1-based position of
/// the child among its siblings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
    UpperLeft,
    UpperRight,
    LowerLeft,
    LowerRight,
    Clockwise,
    Counterclockwise,
    Parent,
    Child(u16),
}

impl Direction {
    pub const SQUARE: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];
    pub const RHOMBUS: [Direction; 4] = [
        Direction::UpperLeft,
        Direction::UpperRight,
        Direction::LowerLeft,
        Direction::LowerRight,
    ];
    pub const TRIANGLE: [Direction; 6] = [
        Direction::Left,
        Direction::Right,
        Direction::UpperLeft,
        Direction::UpperRight,
        Direction::LowerLeft,
        Direction::LowerRight,
    ];
    pub const RING: [Direction; 2] = [Direction::Clockwise, Direction::Counterclockwise];

    /// The label of the reverse move. `Parent` has no unique reverse.
    pub fn opposite(self) -> Option<Direction> {
        use Direction::*;
        Some(match self {
            Up => Down,
            Down => Up,
            Left => Right,
            Right => Left,
            UpperLeft => LowerRight,
            LowerRight => UpperLeft,
            UpperRight => LowerLeft,
            LowerLeft => UpperRight,
            Clockwise => Counterclockwise,
            Counterclockwise => Clockwise,
            Child(_) => Parent,
            Parent => return None,
        })
    }

    /// Rotates a square-grid label 45 degrees clockwise (rhombus vocabulary).
    pub fn rotate_45(self) -> Direction {
        use Direction::*;
        match self {
            Up => UpperRight,
            Right => LowerRight,
            Down => LowerLeft,
            Left => UpperLeft,
            other => other,
        }
    }

    pub fn as_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Direction::*;
        let s = match self {
            Up => "up",
            Down => "down",
            Left => "left",
            Right => "right",
            UpperLeft => "upper-left",
            UpperRight => "upper-right",
            LowerLeft => "lower-left",
            LowerRight => "lower-right",
            Clockwise => "clockwise",
            Counterclockwise => "counterclockwise",
            Parent => "parent",
            Child(i) => return write!(f, "child-{i}"),
        };
        f.write_str(s)
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use Direction::*;
        Ok(match s {
            "up" => Up,
            "down" => Down,
            "left" => Left,
            "right" => Right,
            "upper-left" => UpperLeft,
            "upper-right" => UpperRight,
            "lower-left" => LowerLeft,
            "lower-right" => LowerRight,
            "clockwise" => Clockwise,
            "counterclockwise" => Counterclockwise,
            "parent" => Parent,
            other => match other.strip_prefix("child-").map(str::parse) {
                Some(Ok(i)) => Child(i),
                _ => return Err(format!("unknown direction {other:?}")),
            },
        })
    }
}

impl From<Direction> for String {
    fn from(d: Direction) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for Direction {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opposite_is_an_involution_on_geometric_labels() {
        let all = Direction::SQUARE
            .iter()
            .chain(&Direction::TRIANGLE)
            .chain(&Direction::RHOMBUS)
            .chain(&Direction::RING);
        for d in all {
            assert_eq!(d.opposite().and_then(Direction::opposite), Some(*d));
        }
        assert_eq!(Direction::Child(3).opposite(), Some(Direction::Parent));
        assert_eq!(Direction::Parent.opposite(), None);
    }

    #[test]
    fn text_round_trip() {
        for d in [Direction::LowerLeft, Direction::Counterclockwise, Direction::Child(12)] {
            assert_eq!(d.to_string().parse::<Direction>().unwrap(), d);
        }
        assert!("sideways".parse::<Direction>().is_err());
    }
}
