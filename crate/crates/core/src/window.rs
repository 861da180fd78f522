//! Incremental entropy estimates over sliding windows.
//!
//! A [`BlockStream`] maps every overlapping k-block of a sequence to a dense
//! id once. A [`SlidingWindow`] then keeps per-block counts for the blocks
//! lying entirely inside `[start, start + w)` and updates the plug-in sums in
//! constant time per step.

use alloc::vec;
use alloc::vec::Vec;

use crate::entropy::{block_codes, EntropyEstimate, SymbolSequence};
use crate::variance::{estimate_from_sums, event_terms, FixedSums};
use crate::{Error, Result};

/// Dense block ids of a sequence.
#[derive(Clone, Debug)]
pub struct BlockStream {
    ids: Vec<u32>,
    distinct: usize,
    k: usize,
    len: usize,
}

impl BlockStream {
    pub fn new(seq: &SymbolSequence, k: usize) -> Result<Self> {
        let codes = block_codes(seq, k)?;
        let mut uniq = codes.clone();
        uniq.sort_unstable();
        uniq.dedup();
        let ids = codes
            .iter()
            .map(|c| uniq.binary_search(c).map(|i| i as u32).unwrap_or(0))
            .collect();
        Ok(BlockStream {
            ids,
            distinct: uniq.len(),
            k,
            len: seq.len(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Length of the underlying symbol sequence.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Distinct blocks in the whole sequence.
    pub fn distinct(&self) -> usize {
        self.distinct
    }
}

/// Running block counts for a window of `w` symbols.
#[derive(Clone, Debug)]
pub struct SlidingWindow<'a> {
    stream: &'a BlockStream,
    w: usize,
    n_eff: usize,
    start: usize,
    counts: Vec<u32>,
    table: Vec<[i128; 5]>,
    sums: FixedSums,
}

impl<'a> SlidingWindow<'a> {
    /// Window `[start, start + w)`; requires `k ≤ w` and `start + w ≤ len`.
    pub fn new(stream: &'a BlockStream, w: usize, start: usize) -> Result<Self> {
        if w < stream.k {
            return Err(Error::invalid("w", "window must hold at least one block"));
        }
        if start + w > stream.len {
            return Err(Error::WindowTooLarge { w, len: stream.len });
        }
        let n_eff = w - stream.k + 1;
        let nf = n_eff as f64;
        let mut table = Vec::with_capacity(n_eff + 1);
        table.push([0i128; 5]);
        table.extend((1..=n_eff).map(|c| event_terms(c as u64, nf)));
        let mut win = SlidingWindow {
            stream,
            w,
            n_eff,
            start,
            counts: vec![0; stream.distinct],
            table,
            sums: FixedSums::default(),
        };
        for i in start..start + n_eff {
            win.insert(stream.ids[i]);
        }
        Ok(win)
    }

    #[inline]
    fn insert(&mut self, id: u32) {
        let c = &mut self.counts[id as usize];
        let old = *c as usize;
        *c += 1;
        self.sums.sub(&self.table[old]);
        self.sums.add(&self.table[old + 1]);
        if old == 0 {
            self.sums.m_hat += 1;
        }
    }

    #[inline]
    fn remove(&mut self, id: u32) {
        let c = &mut self.counts[id as usize];
        let old = *c as usize;
        *c -= 1;
        self.sums.sub(&self.table[old]);
        self.sums.add(&self.table[old - 1]);
        if old == 1 {
            self.sums.m_hat -= 1;
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.start + self.w
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn m_hat(&self) -> usize {
        self.sums.m_hat
    }

    /// Shift the window one symbol to the right. Returns `false` at the end.
    pub fn advance(&mut self) -> bool {
        if self.end() >= self.stream.len {
            return false;
        }
        let ids = &self.stream.ids;
        let (out, inc) = (ids[self.start], ids[self.start + self.n_eff]);
        if out != inc {
            self.remove(out);
            self.insert(inc);
        }
        self.start += 1;
        true
    }

    /// Move the window to start at `start`, sliding when that is cheaper
    /// than rebuilding.
    pub fn move_to(&mut self, start: usize) -> Result<()> {
        if start + self.w > self.stream.len {
            return Err(Error::WindowTooLarge {
                w: self.w,
                len: self.stream.len,
            });
        }
        if start > self.start && start - self.start < self.n_eff {
            while self.start < start {
                self.advance();
            }
            return Ok(());
        }
        if start == self.start {
            return Ok(());
        }
        for i in self.start..self.start + self.n_eff {
            self.remove(self.stream.ids[i]);
        }
        self.start = start;
        for i in start..start + self.n_eff {
            self.insert(self.stream.ids[i]);
        }
        Ok(())
    }

    pub fn estimate(&self) -> EntropyEstimate {
        let sums = self.sums.to_sums(self.n_eff as f64);
        estimate_from_sums(&sums, self.stream.k, self.n_eff as u64)
    }
}
