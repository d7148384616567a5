use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU32, Ordering};

use rand::Rng;

use crate::binio::fnv1a32;

/// Character n-grams of `<word>` with lengths in `min_n..=max_n`.
///
/// The whole wrapped token is left out since the word row already covers
/// it, unless it is the only possible n-gram (e.g. "<a>" with min_n 3).
pub fn char_ngrams(word: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let wrapped: Vec<char> = format!("<{word}>").chars().collect();
    let len = wrapped.len();
    let mut out = Vec::new();
    for start in 0..len {
        for n in min_n..=max_n {
            if start + n > len {
                break;
            }
            if n == len && min_n < len {
                continue;
            }
            out.push(wrapped[start..start + n].iter().collect());
        }
    }
    out
}

/// Hash bucket of every n-gram of `word`, in n-gram order (duplicates kept).
pub fn ngram_buckets(word: &str, min_n: usize, max_n: usize, buckets: u32) -> Vec<u32> {
    char_ngrams(word, min_n, max_n)
        .iter()
        .map(|g| fnv1a32(g.as_bytes()) % buckets)
        .collect()
}

/// Input embedding table over a word list plus the hash buckets those
/// words touch. Buckets never touched during training are implicitly zero
/// and are not stored.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SubwordTable {
    pub dim: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: u32,
    pub words: Vec<String>,
    pub word_index: HashMap<String, u32>,
    /// Active bucket ids, ascending; row of bucket `bucket_ids[i]` is `words.len() + i`.
    pub bucket_ids: Vec<u32>,
    pub bucket_rows: HashMap<u32, usize>,
    /// Row-major `(words + active buckets) x dim`.
    pub matrix: Vec<f32>,
    /// Input rows per word (word row first, then its n-gram rows).
    pub word_rows: Vec<Vec<usize>>,
}

impl SubwordTable {
    pub fn new(words: Vec<String>, dim: usize, min_n: usize, max_n: usize, buckets: u32) -> Self {
        let word_index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        let active: BTreeSet<u32> = words
            .iter()
            .flat_map(|w| ngram_buckets(w, min_n, max_n, buckets))
            .collect();
        let bucket_ids: Vec<u32> = active.into_iter().collect();
        Self::with_buckets(words, word_index, bucket_ids, dim, min_n, max_n, buckets, Vec::new())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_buckets(
        words: Vec<String>,
        word_index: HashMap<String, u32>,
        bucket_ids: Vec<u32>,
        dim: usize,
        min_n: usize,
        max_n: usize,
        buckets: u32,
        matrix: Vec<f32>,
    ) -> Self {
        let nw = words.len();
        let bucket_rows: HashMap<u32, usize> = bucket_ids.iter().enumerate().map(|(i, &b)| (b, nw + i)).collect();
        let mut table = SubwordTable {
            dim,
            min_n,
            max_n,
            buckets,
            words,
            word_index,
            bucket_ids,
            bucket_rows,
            matrix,
            word_rows: Vec::new(),
        };
        if table.matrix.is_empty() {
            table.matrix = vec![0.0; table.rows() * dim];
        }
        table.word_rows = (0..nw)
            .map(|i| {
                let mut rows = vec![i];
                rows.extend(table.ngram_rows(&table.words[i]));
                rows
            })
            .collect();
        table
    }

    pub fn rows(&self) -> usize {
        self.words.len() + self.bucket_ids.len()
    }

    pub fn init_uniform<R: Rng>(&mut self, rng: &mut R) {
        let bound = 1.0 / self.dim as f32;
        for x in self.matrix.iter_mut() {
            *x = rng.gen_range(-bound..bound);
        }
    }

    /// Rows of the stored n-gram buckets of `word`.
    pub fn ngram_rows(&self, word: &str) -> Vec<usize> {
        ngram_buckets(word, self.min_n, self.max_n, self.buckets)
            .into_iter()
            .filter_map(|b| self.bucket_rows.get(&b).copied())
            .collect()
    }

    /// Word row (if known) followed by the stored n-gram rows.
    pub fn token_rows(&self, token: &str) -> Vec<usize> {
        match self.word_index.get(token) {
            Some(&i) => self.word_rows[i as usize].clone(),
            None => self.ngram_rows(token),
        }
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.matrix[r * self.dim..(r + 1) * self.dim]
    }

    pub fn sum_rows(&self, rows: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &r in rows {
            for (o, &x) in out.iter_mut().zip(self.row(r)) {
                *o += f64::from(x);
            }
        }
        out
    }
}

/// Shared view of an `f32` matrix for lock-free SGD. Updates from several
/// threads may interleave; each element access is a relaxed atomic.
pub(crate) struct SharedMatrix<'a> {
    cells: &'a [AtomicU32],
    dim: usize,
}

impl<'a> SharedMatrix<'a> {
    pub fn new(data: &'a mut [f32], dim: usize) -> Self {
        // SAFETY: AtomicU32 has the size and alignment of u32/f32, and the
        // exclusive borrow guarantees no non-atomic access while the view lives.
        let cells = unsafe { &*(data as *mut [f32] as *const [AtomicU32]) };
        SharedMatrix { cells, dim }
    }

    pub fn add_row_to(&self, row: usize, acc: &mut [f64], scale: f64) {
        let base = row * self.dim;
        for (j, a) in acc.iter_mut().enumerate() {
            *a += scale * f64::from(f32::from_bits(self.cells[base + j].load(Ordering::Relaxed)));
        }
    }

    pub fn read_row(&self, row: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        self.add_row_to(row, &mut v, 1.0);
        v
    }

    /// `row += scale * delta`.
    pub fn axpy(&self, row: usize, delta: &[f64], scale: f64) {
        let base = row * self.dim;
        for (j, d) in delta.iter().enumerate() {
            let cell = &self.cells[base + j];
            let cur = f32::from_bits(cell.load(Ordering::Relaxed));
            cell.store(((f64::from(cur)) + scale * d).to_bits_f32(), Ordering::Relaxed);
        }
    }
}

trait ToBitsF32 {
    fn to_bits_f32(self) -> u32;
}

impl ToBitsF32 for f64 {
    fn to_bits_f32(self) -> u32 {
        (self as f32).to_bits()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ngrams_of_short_word() {
        assert_eq!(char_ngrams("paz", 3, 3), vec!["<pa", "paz", "az>"]);
        assert_eq!(char_ngrams("ab", 3, 4), vec!["<ab", "ab>"]);
        assert_eq!(char_ngrams("ñu", 2, 2), vec!["<ñ", "ñu", "u>"]);
        assert_eq!(char_ngrams("a", 3, 6), vec!["<a>"]);
        assert!(char_ngrams("a", 4, 6).is_empty());
        assert!(ngram_buckets("palabra", 3, 6, 1).iter().all(|&b| b == 0));
    }

    #[test]
    fn ngram_count() {
        // "<abcdef>" has 8 chars: 6 + 5 + 4 + 3 n-grams of lengths 3..=6.
        assert_eq!(char_ngrams("abcdef", 3, 6).len(), 18);
        // "<abcd>" is itself 6 chars long and is skipped.
        assert_eq!(char_ngrams("abcd", 3, 6).len(), 4 + 3 + 2);
    }

    #[test]
    fn buckets_use_fnv1a() {
        let b = ngram_buckets("ab", 3, 3, u32::MAX);
        assert_eq!(b[0], fnv1a32(b"<ab") % u32::MAX);
        assert!(ngram_buckets("palabra", 3, 6, 7).iter().all(|&x| x < 7));
    }

    #[test]
    fn shared_matrix_axpy() {
        let mut data = vec![1.0f32, 2.0, 3.0, 4.0];
        {
            let m = SharedMatrix::new(&mut data, 2);
            m.axpy(1, &[1.0, -1.0], 0.5);
            assert_eq!(m.read_row(1), vec![3.5, 3.5]);
        }
        assert_eq!(data, vec![1.0, 2.0, 3.5, 3.5]);
    }
}
