//! Bit-string trajectories. Bit j set means a Z operator sits on site j.

use rand::{Rng as _, RngCore};

use crate::rng::Rng;

const EVEN: u64 = 0x5555_5555_5555_5555;
const ODD: u64 = 0xaaaa_aaaa_aaaa_aaaa;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Clone, Debug)]
pub struct TrajectoryState {
    words: Vec<u64>,
    len: usize,
    pub step: u64,
    pub rng: Rng,
    periodic: bool,
}

impl TrajectoryState {
    pub fn new(len: usize, boundary: Boundary, rng: Rng) -> Self {
        TrajectoryState {
            words: vec![0; len.div_ceil(64)],
            len,
            step: 0,
            rng,
            periodic: boundary == Boundary::Periodic,
        }
    }

    pub fn with_seed_site(len: usize, boundary: Boundary, rng: Rng, j0: usize) -> Self {
        let mut s = Self::new(len, boundary, rng);
        s.set(j0, true);
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, j: usize) -> bool {
        self.words[j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, j: usize, v: bool) {
        let (w, b) = (j / 64, j % 64);
        if v {
            self.words[w] |= 1 << b;
        } else {
            self.words[w] &= !(1 << b);
        }
    }

    pub fn count(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_absorbed(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len).map(|j| self.get(j)).collect()
    }

    /// Right neighbour of j, if the bond (j, j+1) exists.
    pub fn neighbour(&self, j: usize) -> Option<usize> {
        if j + 1 < self.len {
            Some(j + 1)
        } else if self.periodic {
            Some(0)
        } else {
            None
        }
    }

    fn last_mask(&self) -> u64 {
        match self.len % 64 {
            0 => u64::MAX,
            r => (1 << r) - 1,
        }
    }

    /// out[j+1] = src[j], wrapping site L-1 onto 0 when periodic.
    fn shift_up(&self, src: &[u64], out: &mut [u64]) {
        let nw = src.len();
        let mut carry = 0;
        for w in 0..nw {
            out[w] = (src[w] << 1) | carry;
            carry = src[w] >> 63;
        }
        let top = self.len - 1;
        let wrap = src[top / 64] >> (top % 64) & 1;
        out[nw - 1] &= self.last_mask();
        if self.periodic {
            out[0] |= wrap;
        }
    }

    /// out[j] = src[j+1], wrapping site 0 onto L-1 when periodic.
    fn shift_down(&self, src: &[u64], out: &mut [u64]) {
        let nw = src.len();
        for w in 0..nw {
            let next = if w + 1 < nw { src[w + 1] << 63 } else { 0 };
            out[w] = (src[w] >> 1) | next;
        }
        out[nw - 1] &= self.last_mask();
        if self.periodic && src[0] & 1 == 1 {
            let top = self.len - 1;
            out[top / 64] |= 1 << (top % 64);
        }
    }

    fn bond_mask(&self, parity: usize) -> Vec<u64> {
        let base = if parity == 0 { EVEN } else { ODD };
        let mut m = vec![base; self.words.len()];
        let nw = m.len();
        m[nw - 1] &= self.last_mask();
        if !self.periodic {
            let top = self.len - 1;
            m[top / 64] &= !(1 << (top % 64));
        }
        m
    }

    /// One East layer on bonds (j, j+1) with j of the given parity:
    /// wherever b_j = 1 the bit b_{j+1} is redrawn uniformly.
    pub fn east_layer(&mut self, parity: usize) {
        let mask = self.bond_mask(parity);
        let ctl: Vec<u64> = self.words.iter().zip(&mask).map(|(b, m)| b & m).collect();
        let mut tgt = vec![0; ctl.len()];
        self.shift_up(&ctl, &mut tgt);
        for (w, t) in self.words.iter_mut().zip(&tgt) {
            if *t != 0 {
                let r = self.rng.next_u64();
                *w = (*w & !t) | (t & r);
            }
        }
    }

    /// One SSEP layer: every bond holding exactly one bit swaps with probability 1/2.
    pub fn ssep_layer(&mut self, parity: usize) {
        let mask = self.bond_mask(parity);
        let mut right = vec![0; self.words.len()];
        self.shift_down(&self.words, &mut right);
        let mut sel = vec![0; self.words.len()];
        for w in 0..sel.len() {
            let x = (self.words[w] ^ right[w]) & mask[w];
            if x != 0 {
                sel[w] = x & self.rng.next_u64();
            }
        }
        let mut up = vec![0; sel.len()];
        self.shift_up(&sel, &mut up);
        for w in 0..sel.len() {
            self.words[w] ^= sel[w] | up[w];
        }
    }

    /// Measure-Z plus conditional-X on every site with probability gamma:
    /// each set bit is cleared independently. One 32-bit draw per set bit.
    pub fn measure_sweep(&mut self, gamma: f64) {
        let thr = threshold(gamma);
        if thr == 0 {
            return;
        }
        for w in 0..self.words.len() {
            let mut x = self.words[w];
            let mut clear = 0;
            while x != 0 {
                let b = x.trailing_zeros();
                x &= x - 1;
                if (self.rng.next_u32() as u64) < thr {
                    clear |= 1 << b;
                }
            }
            self.words[w] &= !clear;
        }
    }

    /// Apply the SSEP rule to a single bond with an explicit coin.
    pub fn ssep_bond_apply(&mut self, j: usize, swap: bool) {
        if let Some(k) = self.neighbour(j) {
            let (a, b) = (self.get(j), self.get(k));
            if a != b && swap {
                self.set(j, b);
                self.set(k, a);
            }
        }
    }

    /// Apply the East rule to a single bond with an explicit coin.
    pub fn east_bond_apply(&mut self, j: usize, coin: bool) {
        if let Some(k) = self.neighbour(j) {
            if self.get(j) {
                self.set(k, coin);
            }
        }
    }
}

/// P(u32 < thr) = thr / 2^32.
pub(crate) fn threshold(gamma: f64) -> u64 {
    (gamma.clamp(0.0, 1.0) * 4_294_967_296.0).round() as u64
}

/// Single-bond SSEP update: swap with probability 1/2 if exactly one bit is set.
pub fn ssep_bond_update(state: &mut TrajectoryState, j: usize) {
    let coin = state.rng.random::<bool>();
    state.ssep_bond_apply(j, coin);
}

/// Single-bond East update: if b_j = 1 redraw b_{j+1} uniformly.
pub fn east_bond_update(state: &mut TrajectoryState, j: usize) {
    if state.get(j) {
        let coin = state.rng.random::<bool>();
        state.east_bond_apply(j, coin);
    }
}

/// Measure-and-feedback sweep, see [`TrajectoryState::measure_sweep`].
pub fn adaptive_measure_sweep(state: &mut TrajectoryState, gamma: f64) {
    state.measure_sweep(gamma);
}
