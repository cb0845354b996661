//! Statistical check that Alice's view does not depend on Bob's choice bit.

use crate::hashing::Bits;
use crate::stats::welch_p_value;

use super::transport::{Direction, Transcript};
use super::wire::{Message, Tag};

/// Fewer transcripts per choice than this make the test inconclusive.
pub const MIN_TRANSCRIPTS: usize = 1000;

/// What Alice sees of Bob's choice: her own bases and the index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliceView {
    pub bases: Bits,
    pub mask: Bits,
}

impl AliceView {
    pub fn from_transcript(t: &Transcript) -> Option<Self> {
        let find = |dir: Direction, tag: Tag| {
            t.entries
                .iter()
                .find(|(d, f)| *d == dir && f.tag == tag)
                .and_then(|(_, f)| Message::from_frame(f).ok())
        };
        let Some(Message::Bases(bases)) = find(Direction::AliceToBob, Tag::Bases) else {
            return None;
        };
        let Some(Message::IndexSets { mask, .. }) = find(Direction::BobToAlice, Tag::IndexSets)
        else {
            return None;
        };
        (bases.len() == mask.len()).then_some(Self { bases, mask })
    }

    /// Fraction of rounds where membership in `I₀` coincides with Alice
    /// having measured X.
    pub fn agreement(&self) -> f64 {
        let n = self.bases.len();
        let agree = (0..n)
            .filter(|&i| self.mask.get(i) == !self.bases.get(i))
            .count();
        agree as f64 / n as f64
    }

    /// `|I₀| / n`.
    pub fn set0_fraction(&self) -> f64 {
        self.mask.count_ones() as f64 / self.mask.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyReport {
    pub transcripts: [usize; 2],
    pub p_agreement: f64,
    pub p_set_size: f64,
    /// Smallest p-value is below `alpha / 2` (Bonferroni over two statistics).
    pub distinguishable: bool,
    pub inconclusive: bool,
}

/// Two-sample tests of per-transcript statistics between `t = 0` and `t = 1`.
pub fn receiver_privacy_check(t0: &[AliceView], t1: &[AliceView], alpha: f64) -> PrivacyReport {
    let stat =
        |views: &[AliceView], f: fn(&AliceView) -> f64| views.iter().map(f).collect::<Vec<f64>>();
    let inconclusive = t0.len() < MIN_TRANSCRIPTS || t1.len() < MIN_TRANSCRIPTS;
    let (p_agreement, p_set_size) = if t0.len() < 2 || t1.len() < 2 {
        (1.0, 1.0)
    } else {
        (
            welch_p_value(
                &stat(t0, AliceView::agreement),
                &stat(t1, AliceView::agreement),
            ),
            welch_p_value(
                &stat(t0, AliceView::set0_fraction),
                &stat(t1, AliceView::set0_fraction),
            ),
        )
    };
    PrivacyReport {
        transcripts: [t0.len(), t1.len()],
        p_agreement,
        p_set_size,
        distinguishable: !inconclusive && p_agreement.min(p_set_size) < alpha / 2.0,
        inconclusive,
    }
}
