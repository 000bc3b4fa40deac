//! Exhaustive set-partition enumeration via restricted growth strings.

/// Iterates over every partition of `{0, .., n-1}`.
///
/// Each item is a list of blocks; blocks are sorted by their smallest
/// element and each block is sorted ascending.
#[derive(Debug, Clone)]
pub struct SetPartitions {
    n: usize,
    // a[i] is the block index of element i; a[0] = 0 and a[i] <= 1 + max(a[..i]).
    growth: Vec<usize>,
    prefix_max: Vec<usize>,
    done: bool,
}

impl SetPartitions {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            growth: vec![0; n],
            prefix_max: vec![0; n],
            done: false,
        }
    }

    fn blocks(&self) -> Vec<Vec<usize>> {
        let count = self.growth.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); count];
        for (elem, &b) in self.growth.iter().enumerate() {
            blocks[b].push(elem);
        }
        blocks
    }

    fn advance(&mut self) -> bool {
        for i in (1..self.n).rev() {
            if self.growth[i] <= self.prefix_max[i - 1] {
                self.growth[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.growth[i]);
                for j in i + 1..self.n {
                    self.growth[j] = 0;
                    self.prefix_max[j] = self.prefix_max[i];
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for SetPartitions {
    type Item = Vec<Vec<usize>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.blocks();
        if !self.advance() {
            self.done = true;
        }
        Some(item)
    }
}

/// Partitions of an arbitrary list of labels, in the same order as [`SetPartitions`].
pub fn partitions_of<T: Clone>(items: &[T]) -> impl Iterator<Item = Vec<Vec<T>>> + '_ {
    SetPartitions::new(items.len())
        .map(move |p| p.into_iter().map(|b| b.into_iter().map(|i| items[i].clone()).collect()).collect())
}

/// Bell number B(n) via the Bell triangle.
pub fn bell_number(n: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        row = next;
    }
    row[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn counts_match_bell_numbers() {
        let expected = [1u64, 1, 2, 5, 15, 52, 203, 877];
        for (n, &b) in expected.iter().enumerate() {
            assert_eq!(bell_number(n), b);
            assert_eq!(SetPartitions::new(n).count() as u64, b, "n = {n}");
        }
    }

    #[test]
    fn partitions_are_distinct_and_valid() {
        let all: Vec<_> = SetPartitions::new(5).collect();
        let canonical: BTreeSet<_> = all.iter().cloned().collect();
        assert_eq!(canonical.len(), all.len());
        for p in &all {
            let mut seen: Vec<usize> = p.iter().flatten().copied().collect();
            seen.sort_unstable();
            assert_eq!(seen, vec![0, 1, 2, 3, 4]);
            assert!(p.iter().all(|b| !b.is_empty()));
        }
        assert_eq!(all.first().unwrap(), &vec![vec![0, 1, 2, 3, 4]]);
        assert_eq!(all.last().unwrap().len(), 5);
    }

    #[test]
    fn labelled_partitions() {
        let labels = ['a', 'b', 'c'];
        let p: Vec<_> = partitions_of(&labels).collect();
        assert_eq!(p.len(), 5);
        assert!(p.contains(&vec![vec!['a', 'c'], vec!['b']]));
    }
}
