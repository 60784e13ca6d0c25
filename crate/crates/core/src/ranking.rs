//! Bounded top-k selection with a deterministic total order: higher score
//! first, ascending document id on ties.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: u64,
    pub score: f64,
}

/// Results sorted best-first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedResults {
    pub entries: Vec<ScoredDoc>,
}

impl RankedResults {
    pub fn ids(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.doc_id).collect()
    }

    pub fn top(&self) -> Option<u64> {
        self.entries.first().map(|e| e.doc_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank of `doc_id`, if present.
    pub fn rank_of(&self, doc_id: u64) -> Option<usize> {
        self.entries.iter().position(|e| e.doc_id == doc_id).map(|p| p + 1)
    }
}

/// Ranking order: `Less` means `a` ranks ahead of `b`.
pub fn rank_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score.total_cmp(&a.score).then(a.doc_id.cmp(&b.doc_id))
}

/// Heap element ordered so the max-heap root is the worst retained entry.
struct Worst(ScoredDoc);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Worst {}

impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&self.0, &other.0)
    }
}

pub struct TopK {
    k: usize,
    heap: BinaryHeap<Worst>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k.saturating_add(1).min(1 << 16)),
        }
    }

    pub fn push(&mut self, doc_id: u64, score: f64) {
        if self.k == 0 {
            return;
        }
        let entry = ScoredDoc { doc_id, score };
        if self.heap.len() < self.k {
            self.heap.push(Worst(entry));
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if rank_order(&entry, &worst.0) == Ordering::Less {
                *worst = Worst(entry);
            }
        }
    }

    pub fn into_results(self) -> RankedResults {
        let mut entries: Vec<ScoredDoc> = self.heap.into_iter().map(|w| w.0).collect();
        entries.sort_by(rank_order);
        RankedResults { entries }
    }
}
