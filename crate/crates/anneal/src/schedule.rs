//! Cooling schedules: strictly increasing inverse-temperature sequences
//! from 0 to ∞, each step annotated with the kind of move that produced it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partfn::Beta;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("schedule needs at least two points (0 and inf)")]
    TooShort,
    #[error("schedule must start at 0 (got {0})")]
    BadStart(Beta),
    #[error("schedule must end at inf")]
    BadEnd,
    #[error("schedule must be strictly increasing at index {0}")]
    NotIncreasing(usize),
    #[error("need one move tag per step: {points} points but {moves} moves")]
    MoveCountMismatch { points: usize, moves: usize },
}

/// What produced a step of the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    /// Maximal Chebyshev step found by the adaptive algorithm.
    Optimal,
    /// Step capped by the width constraint of the rough estimator.
    Long,
    /// Geometric bridge that retires a heavy interval.
    IntervalMove,
    /// Point of a fixed formula schedule.
    NonAdaptive,
    /// Point inserted by the reversibility augmentation.
    Augmented,
    /// The closing step to ∞.
    Final,
}

/// A cooling schedule `β_0 = 0 < β_1 < … < β_ℓ = ∞` with per-step move tags.
///
/// `moves[i]` annotates the step from `betas[i]` to `betas[i+1]`; the length
/// of the schedule in the usual sense is the number of steps `ℓ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct CoolingSchedule {
    betas: Vec<Beta>,
    moves: Vec<MoveKind>,
}

#[derive(Serialize, Deserialize)]
struct RawSchedule {
    betas: Vec<Beta>,
    moves: Vec<MoveKind>,
}

impl TryFrom<RawSchedule> for CoolingSchedule {
    type Error = ScheduleError;
    fn try_from(raw: RawSchedule) -> Result<Self, Self::Error> {
        CoolingSchedule::new(raw.betas, raw.moves)
    }
}

impl From<CoolingSchedule> for RawSchedule {
    fn from(s: CoolingSchedule) -> Self {
        RawSchedule {
            betas: s.betas,
            moves: s.moves,
        }
    }
}

impl CoolingSchedule {
    pub fn new(betas: Vec<Beta>, moves: Vec<MoveKind>) -> Result<Self, ScheduleError> {
        if betas.len() < 2 {
            return Err(ScheduleError::TooShort);
        }
        if betas[0] != Beta::ZERO {
            return Err(ScheduleError::BadStart(betas[0]));
        }
        if *betas.last().unwrap() != Beta::Infinite {
            return Err(ScheduleError::BadEnd);
        }
        for i in 1..betas.len() {
            if !(betas[i - 1] < betas[i]) {
                return Err(ScheduleError::NotIncreasing(i));
            }
        }
        if moves.len() + 1 != betas.len() {
            return Err(ScheduleError::MoveCountMismatch {
                points: betas.len(),
                moves: moves.len(),
            });
        }
        Ok(CoolingSchedule { betas, moves })
    }

    /// Uniform tagging: every step gets `kind` except the final one.
    pub fn from_betas(betas: Vec<Beta>, kind: MoveKind) -> Result<Self, ScheduleError> {
        let steps = betas.len().saturating_sub(1);
        let mut moves = vec![kind; steps];
        if let Some(last) = moves.last_mut() {
            *last = MoveKind::Final;
        }
        CoolingSchedule::new(betas, moves)
    }

    #[inline]
    pub fn betas(&self) -> &[Beta] {
        &self.betas
    }

    #[inline]
    pub fn moves(&self) -> &[MoveKind] {
        &self.moves
    }

    #[inline]
    pub fn num_points(&self) -> usize {
        self.betas.len()
    }

    /// Number of steps `ℓ` (ratios to estimate).
    #[inline]
    pub fn num_steps(&self) -> usize {
        self.betas.len() - 1
    }

    /// Consecutive pairs `(β_i, β_{i+1})`.
    pub fn steps(&self) -> impl Iterator<Item = (Beta, Beta)> + '_ {
        self.betas.windows(2).map(|w| (w[0], w[1]))
    }

    /// Finite interior points, excluding the leading 0.
    pub fn interior(&self) -> impl Iterator<Item = f64> + '_ {
        self.betas
            .iter()
            .skip(1)
            .filter_map(|b| b.finite())
            .filter(|&b| b > 0.0)
    }

    /// CSV with one β per row (RFC 4180 line endings; `inf` spells ∞).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,beta,move_into\r\n");
        for (i, beta) in self.betas.iter().enumerate() {
            let tag = if i == 0 {
                "start".to_string()
            } else {
                format!("{:?}", self.moves[i - 1]).to_lowercase()
            };
            out.push_str(&format!("{i},{beta},{tag}\r\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: f64) -> Beta {
        Beta::Finite(v)
    }

    #[test]
    fn construction_enforces_invariants() {
        assert_eq!(
            CoolingSchedule::from_betas(vec![Beta::ZERO], MoveKind::NonAdaptive),
            Err(ScheduleError::TooShort)
        );
        assert_eq!(
            CoolingSchedule::from_betas(vec![b(0.1), Beta::Infinite], MoveKind::NonAdaptive),
            Err(ScheduleError::BadStart(b(0.1)))
        );
        assert_eq!(
            CoolingSchedule::from_betas(vec![Beta::ZERO, b(1.0)], MoveKind::NonAdaptive),
            Err(ScheduleError::BadEnd)
        );
        assert_eq!(
            CoolingSchedule::from_betas(
                vec![Beta::ZERO, b(1.0), b(1.0), Beta::Infinite],
                MoveKind::NonAdaptive
            ),
            Err(ScheduleError::NotIncreasing(2))
        );
        let ok = CoolingSchedule::from_betas(
            vec![Beta::ZERO, b(0.5), Beta::Infinite],
            MoveKind::NonAdaptive,
        )
        .unwrap();
        assert_eq!(ok.num_steps(), 2);
        assert_eq!(ok.moves(), &[MoveKind::NonAdaptive, MoveKind::Final]);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let s = CoolingSchedule::from_betas(
            vec![Beta::ZERO, b(0.1 + 0.2), b(1.0 / 3.0), Beta::Infinite],
            MoveKind::Optimal,
        )
        .unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"inf\""));
        let back: CoolingSchedule = serde_json::from_str(&text).unwrap();
        for (x, y) in s.betas().iter().zip(back.betas()) {
            match (x, y) {
                (Beta::Finite(a), Beta::Finite(c)) => assert_eq!(a.to_bits(), c.to_bits()),
                (Beta::Infinite, Beta::Infinite) => {}
                _ => panic!("variant mismatch"),
            }
        }
        assert_eq!(s.moves(), back.moves());
    }

    #[test]
    fn malformed_json_is_rejected() {
        let bad = r#"{"betas":[0.0,2.0,1.0,"inf"],"moves":["optimal","optimal","final"]}"#;
        assert!(serde_json::from_str::<CoolingSchedule>(bad).is_err());
        let bad_end = r#"{"betas":[0.0,2.0],"moves":["final"]}"#;
        assert!(serde_json::from_str::<CoolingSchedule>(bad_end).is_err());
    }

    #[test]
    fn csv_has_one_beta_per_row() {
        let s = CoolingSchedule::from_betas(
            vec![Beta::ZERO, b(0.25), Beta::Infinite],
            MoveKind::NonAdaptive,
        )
        .unwrap();
        let csv = s.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().last().unwrap().contains("inf"));
    }
}
