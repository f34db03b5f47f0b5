//! Ingestion of triplet interaction logs into a sparse binary user-item
//! matrix, plus the per-row count statistics the moment estimators divide by.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Column selection for line-oriented triplet files.
///
/// Each data line carries at least a user key and an item key; extra columns
/// (timestamps, counts) are ignored. With `delimiter = None` a line is split
/// on tabs when it contains one, otherwise on commas.
#[derive(Debug, Clone)]
pub struct TripletSchema {
    pub user_col: usize,
    pub item_col: usize,
    pub delimiter: Option<char>,
}

impl Default for TripletSchema {
    fn default() -> Self {
        TripletSchema {
            user_col: 0,
            item_col: 1,
            delimiter: None,
        }
    }
}

/// Dense re-indexing of string keys in first-appearance order.
#[derive(Debug, Clone, Default)]
pub struct KeyIndex {
    keys: Vec<String>,
    index: HashMap<String, u32>,
}

impl KeyIndex {
    fn intern(&mut self, key: &str) -> u32 {
        if let Some(&id) = self.index.get(key) {
            return id;
        }
        let id = self.keys.len() as u32;
        self.keys.push(key.to_string());
        self.index.insert(key.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, id: usize) -> &str {
        &self.keys[id]
    }

    pub fn get(&self, key: &str) -> Option<u32> {
        self.index.get(key).copied()
    }
}

/// Sparse binary user-item matrix in compressed-row form.
///
/// Rows hold strictly increasing item ids, so duplicates are impossible by
/// construction. The pass counter records how many complete row scans the
/// moment and posterior extraction operations have performed; it is atomic so
/// an immutable matrix can be shared across threads.
#[derive(Debug)]
pub struct InteractionMatrix {
    n_users: usize,
    n_items: usize,
    row_offsets: Vec<usize>,
    item_ids: Vec<u32>,
    pass_counter: AtomicU64,
}

impl InteractionMatrix {
    /// Builds a matrix from per-user item lists. Every row must be strictly
    /// increasing with ids below `n_items`.
    pub fn from_rows(n_items: usize, rows: &[Vec<u32>]) -> Result<Self> {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut item_ids = Vec::new();
        row_offsets.push(0usize);
        for (u, row) in rows.iter().enumerate() {
            for (pos, &item) in row.iter().enumerate() {
                if item as usize >= n_items {
                    return Err(Error::InvalidMatrix(format!(
                        "row {u} references item {item} but the matrix has {n_items} items"
                    )));
                }
                if pos > 0 && row[pos - 1] >= item {
                    return Err(Error::InvalidMatrix(format!(
                        "row {u} is not strictly increasing at position {pos}"
                    )));
                }
            }
            item_ids.extend_from_slice(row);
            row_offsets.push(item_ids.len());
        }
        Ok(InteractionMatrix {
            n_users: rows.len(),
            n_items,
            row_offsets,
            item_ids,
            pass_counter: AtomicU64::new(0),
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn nnz(&self) -> usize {
        self.item_ids.len()
    }

    pub fn row(&self, user: usize) -> &[u32] {
        &self.item_ids[self.row_offsets[user]..self.row_offsets[user + 1]]
    }

    pub fn nnz_row(&self, user: usize) -> usize {
        self.row_offsets[user + 1] - self.row_offsets[user]
    }

    /// Number of users with no interactions. Permitted, but surfaced so
    /// callers can warn about them.
    pub fn empty_row_count(&self) -> usize {
        (0..self.n_users)
            .filter(|&u| self.nnz_row(u) == 0)
            .count()
    }

    /// Plain row iteration without pass accounting.
    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        (0..self.n_users).map(move |u| self.row(u))
    }

    /// Row iteration that counts as one full pass over the data once the
    /// final row has been consumed. Abandoned iterations do not count.
    pub fn scan_rows(&self) -> ScanRows<'_> {
        ScanRows {
            matrix: self,
            next: 0,
            counted: false,
        }
    }

    /// Completed full passes over the data.
    pub fn passes(&self) -> u64 {
        self.pass_counter.load(Ordering::Relaxed)
    }
}

/// Counting row iterator returned by [`InteractionMatrix::scan_rows`].
pub struct ScanRows<'a> {
    matrix: &'a InteractionMatrix,
    next: usize,
    counted: bool,
}

impl<'a> Iterator for ScanRows<'a> {
    type Item = &'a [u32];

    fn next(&mut self) -> Option<&'a [u32]> {
        if self.next < self.matrix.n_users {
            let row = self.matrix.row(self.next);
            self.next += 1;
            Some(row)
        } else {
            if !self.counted {
                self.counted = true;
                self.matrix.pass_counter.fetch_add(1, Ordering::Relaxed);
            }
            None
        }
    }
}

/// Result of [`load_triplets`]: the matrix plus the key dictionaries needed
/// to map recommendations back to the original identifiers.
#[derive(Debug)]
pub struct TripletData {
    pub matrix: InteractionMatrix,
    pub users: KeyIndex,
    pub items: KeyIndex,
}

/// Reads a line-oriented interaction log. Users and items are densely
/// re-indexed in first-appearance order and duplicate pairs collapse to a
/// single entry. Lines starting with `#` are skipped.
pub fn load_triplets(reader: impl BufRead, schema: &TripletSchema) -> Result<TripletData> {
    let mut users = KeyIndex::default();
    let mut items = KeyIndex::default();
    let mut rows: Vec<BTreeSet<u32>> = Vec::new();
    let needed = schema.user_col.max(schema.item_col) + 1;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(format!("reading line {line_no}"), e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.starts_with('#') {
            continue;
        }
        let delim = match schema.delimiter {
            Some(d) => d,
            None => {
                if line.contains('\t') {
                    '\t'
                } else {
                    ','
                }
            }
        };
        let fields: Vec<&str> = line.split(delim).collect();
        if fields.len() < needed {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: format!(
                    "expected at least {needed} field(s) separated by {delim:?}, found {}",
                    fields.len()
                ),
            });
        }
        let user_key = fields[schema.user_col];
        let item_key = fields[schema.item_col];
        if user_key.is_empty() || item_key.is_empty() {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: "empty user or item key".to_string(),
            });
        }
        let u = users.intern(user_key) as usize;
        let i = items.intern(item_key);
        if u == rows.len() {
            rows.push(BTreeSet::new());
        }
        rows[u].insert(i);
    }

    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }

    let row_vecs: Vec<Vec<u32>> = rows.into_iter().map(|s| s.into_iter().collect()).collect();
    let matrix = InteractionMatrix::from_rows(items.len(), &row_vecs)?;
    Ok(TripletData {
        matrix,
        users,
        items,
    })
}

/// Exact count statistics of the row sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    /// Mean items per user.
    pub d1s: f64,
    /// Mean squared items per user.
    pub d2s: f64,
    /// Mean cubed items per user.
    pub d3s: f64,
    pub sum_nnz2: u128,
    pub sum_nnz3: u128,
}

/// Computes the exact integer sums of squared and cubed row sizes. Works off
/// the row offsets alone, so it does not consume a data pass.
pub fn compute_stats(x: &InteractionMatrix) -> Result<DatasetStats> {
    if x.n_users() == 0 {
        return Err(Error::EmptyInput);
    }
    let mut sum1: u128 = 0;
    let mut sum2: u128 = 0;
    let mut sum3: u128 = 0;
    for u in 0..x.n_users() {
        let n = x.nnz_row(u) as u128;
        sum1 += n;
        sum2 += n * n;
        sum3 += n * n * n;
    }
    if sum1 == 0 {
        return Err(Error::AllRowsEmpty);
    }
    let n_users = x.n_users() as f64;
    Ok(DatasetStats {
        d1s: sum1 as f64 / n_users,
        d2s: sum2 as f64 / n_users,
        d3s: sum3 as f64 / n_users,
        sum_nnz2: sum2,
        sum_nnz3: sum3,
    })
}
