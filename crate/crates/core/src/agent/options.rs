//! The discrete option set: joint subchannel assignment and IRS pairing.

use crate::env::{Assignment, Scenario};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptionEntry {
    /// Subchannel of each SU.
    pub channels: Vec<usize>,
    /// IRS paired with each SU.
    pub irs: Vec<usize>,
}

/// Every feasible `(xi, zeta)` pair in lexicographic order.
///
/// Channel maps (injective SU to subchannel) form the outer order and
/// pairings (any SU to IRS map) the inner one, so option
/// `p * Z^K + q` combines channel map `p` with pairing `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionCatalog {
    entries: Vec<OptionEntry>,
    num_channels: usize,
    num_irs: usize,
}

fn injective_maps(k: usize, c: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, c: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for ch in 0..c {
            if !cur.contains(&ch) {
                cur.push(ch);
                rec(k, c, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(k, c, &mut Vec::with_capacity(k), &mut out);
    out
}

fn all_maps(k: usize, z: usize) -> Vec<Vec<usize>> {
    let total = z.pow(k as u32);
    (0..total)
        .map(|mut i| {
            let mut m = vec![0; k];
            for slot in m.iter_mut().rev() {
                *slot = i % z;
                i /= z;
            }
            m
        })
        .collect()
}

impl OptionCatalog {
    pub fn build(s: &Scenario) -> Result<Self> {
        Self::with_sizes(s.num_su(), s.subchannels, s.num_irs())
    }

    pub fn with_sizes(k: usize, c: usize, z: usize) -> Result<Self> {
        if k == 0 || z == 0 || k > c {
            return Err(invalid(format!("no feasible options for K={k}, C={c}, Z={z}")));
        }
        let pairings = all_maps(k, z);
        let entries = injective_maps(k, c)
            .into_iter()
            .flat_map(|ch| {
                pairings.iter().map(move |p| OptionEntry {
                    channels: ch.clone(),
                    irs: p.clone(),
                })
            })
            .collect();
        Ok(Self {
            entries,
            num_channels: c,
            num_irs: z,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, i: usize) -> &OptionEntry {
        &self.entries[i]
    }

    pub fn entries(&self) -> &[OptionEntry] {
        &self.entries
    }

    pub fn assignment(&self, i: usize) -> Assignment {
        let e = &self.entries[i];
        Assignment::from_maps(&e.channels, &e.irs, self.num_channels, self.num_irs).expect("catalog entries are feasible")
    }

    /// Index of the option with these maps.
    pub fn index_of(&self, channels: &[usize], irs: &[usize]) -> Option<usize> {
        self.entries.iter().position(|e| e.channels == channels && e.irs == irs)
    }

    pub fn one_hot(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        v[i] = 1.0;
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(OptionCatalog::with_sizes(2, 2, 3).unwrap().len(), 18);
        assert_eq!(OptionCatalog::with_sizes(1, 1, 1).unwrap().len(), 1);
        assert_eq!(OptionCatalog::with_sizes(2, 3, 2).unwrap().len(), 6 * 4);
        assert!(OptionCatalog::with_sizes(3, 2, 2).is_err());
    }

    #[test]
    fn lexicographic_and_feasible() {
        let cat = OptionCatalog::with_sizes(2, 2, 3).unwrap();
        assert_eq!(cat.entry(0).channels, vec![0, 1]);
        assert_eq!(cat.entry(0).irs, vec![0, 0]);
        assert_eq!(cat.entry(1).irs, vec![0, 1]);
        assert_eq!(cat.entry(9).channels, vec![1, 0]);
        for i in 0..cat.len() {
            let a = cat.assignment(i);
            assert!(a.c6_valid() && a.c7_valid());
            let e = cat.entry(i);
            assert_eq!(cat.index_of(&e.channels, &e.irs), Some(i));
        }
    }
}
