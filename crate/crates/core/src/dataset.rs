//! Labeled transaction databases stored column-major as per-item bitsets.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bitset::Bitset;

pub type ItemId = u32;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("label/transaction count mismatch: {labels} labels for {transactions} transactions")]
    CountMismatch { labels: usize, transactions: usize },
    #[error("{path}:{line}: label token {token:?} is not 0 or 1")]
    BadLabel {
        path: PathBuf,
        line: usize,
        token: String,
    },
    #[error("empty database")]
    Empty,
    #[error("single-class labels: {positive} positive of {total} transactions")]
    SingleClass { positive: usize, total: usize },
    #[error("duplicate item name {0:?}")]
    DuplicateItem(String),
    #[error("empty item name")]
    EmptyItemName,
    #[error("item id {id} out of range ({num_items} items)")]
    ItemOutOfRange { id: ItemId, num_items: usize },
    #[error("a labels file is required for {0}")]
    MissingLabels(PathBuf),
}

/// Occurrence counts of an itemset: `total` transactions contain it, of
/// which `positive` are labeled positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternSupport {
    pub total: u32,
    pub positive: u32,
}

#[derive(Debug, Clone)]
pub struct TransactionDatabase {
    item_names: Vec<String>,
    item_bitsets: Vec<Bitset>,
    item_support: Vec<u32>,
    positive_bitset: Bitset,
    num_transactions: usize,
    num_positive: usize,
}

impl TransactionDatabase {
    /// Builds a database from explicit transactions (lists of item names)
    /// and boolean labels. Item ids follow first appearance.
    pub fn from_transactions<S: AsRef<str>>(
        transactions: &[Vec<S>],
        labels: &[bool],
    ) -> Result<Self, DatasetError> {
        if labels.len() != transactions.len() {
            return Err(DatasetError::CountMismatch {
                labels: labels.len(),
                transactions: transactions.len(),
            });
        }
        let mut builder = Builder::default();
        for t in transactions {
            builder.push_row(t.iter().map(|s| s.as_ref()));
        }
        builder.finish(labels)
    }

    /// Builds a database from a dense 0/1 matrix (`rows[t][i]`).
    pub fn from_matrix(
        item_names: Vec<String>,
        rows: &[Vec<bool>],
        labels: &[bool],
    ) -> Result<Self, DatasetError> {
        if labels.len() != rows.len() {
            return Err(DatasetError::CountMismatch {
                labels: labels.len(),
                transactions: rows.len(),
            });
        }
        let mut builder = Builder::default();
        for name in &item_names {
            if builder.ids.insert(name.clone(), builder.names.len() as ItemId).is_some() {
                return Err(DatasetError::DuplicateItem(name.clone()));
            }
            builder.names.push(name.clone());
        }
        for row in rows {
            builder.rows.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(i, _)| i as ItemId)
                    .collect(),
            );
        }
        builder.finish(labels)
    }

    /// Loads a database from disk. A `.csv` transactions path selects the
    /// combined format (label column first, header row of item names) and
    /// ignores `labels_path`; otherwise both files are required.
    pub fn load(transactions_path: &Path, labels_path: Option<&Path>) -> Result<Self, DatasetError> {
        let is_csv = transactions_path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if is_csv {
            return load_csv(transactions_path);
        }
        let labels_path =
            labels_path.ok_or_else(|| DatasetError::MissingLabels(transactions_path.to_path_buf()))?;
        let text = read_text(transactions_path)?;
        let mut builder = Builder::default();
        for line in text.lines() {
            builder.push_row(line.split_whitespace());
        }
        let label_text = read_text(labels_path)?;
        let labels = parse_labels(labels_path, &label_text)?;
        builder.finish(&labels)
    }

    pub fn num_items(&self) -> usize {
        self.item_names.len()
    }

    pub fn num_transactions(&self) -> usize {
        self.num_transactions
    }

    pub fn num_positive(&self) -> usize {
        self.num_positive
    }

    pub fn item_names(&self) -> &[String] {
        &self.item_names
    }

    pub fn item_name(&self, id: ItemId) -> &str {
        &self.item_names[id as usize]
    }

    pub fn item_bitset(&self, id: ItemId) -> &Bitset {
        &self.item_bitsets[id as usize]
    }

    pub fn item_bitsets(&self) -> &[Bitset] {
        &self.item_bitsets
    }

    /// Number of transactions containing each single item.
    pub fn item_supports(&self) -> &[u32] {
        &self.item_support
    }

    pub fn positive_bitset(&self) -> &Bitset {
        &self.positive_bitset
    }

    pub fn is_positive(&self, transaction: usize) -> bool {
        self.positive_bitset.get(transaction)
    }

    /// Transactions as item-id lists, in row order.
    pub fn rows(&self) -> Vec<Vec<ItemId>> {
        let mut rows = vec![Vec::new(); self.num_transactions];
        for (item, bits) in self.item_bitsets.iter().enumerate() {
            for t in bits.iter_ones() {
                rows[t].push(item as ItemId);
            }
        }
        rows
    }

    /// Transaction cover of an itemset; the empty itemset covers every row.
    pub fn cover_of(&self, itemset: &[ItemId]) -> Result<Bitset, DatasetError> {
        let mut cover = Bitset::ones(self.num_transactions);
        for &id in itemset {
            self.check_item(id)?;
            cover.and_assign(&self.item_bitsets[id as usize]);
        }
        Ok(cover)
    }

    pub fn support_of(&self, itemset: &[ItemId]) -> Result<PatternSupport, DatasetError> {
        let cover = self.cover_of(itemset)?;
        Ok(self.support_of_cover(&cover))
    }

    #[inline]
    pub fn support_of_cover(&self, cover: &Bitset) -> PatternSupport {
        PatternSupport {
            total: cover.count_ones(),
            positive: cover.and_count(&self.positive_bitset),
        }
    }

    pub fn check_item(&self, id: ItemId) -> Result<(), DatasetError> {
        if (id as usize) < self.num_items() {
            Ok(())
        } else {
            Err(DatasetError::ItemOutOfRange {
                id,
                num_items: self.num_items(),
            })
        }
    }

    /// Resolves item names back to ids.
    pub fn item_id(&self, name: &str) -> Option<ItemId> {
        self.item_names
            .iter()
            .position(|n| n == name)
            .map(|i| i as ItemId)
    }
}

#[derive(Default)]
struct Builder {
    names: Vec<String>,
    ids: HashMap<String, ItemId>,
    rows: Vec<Vec<ItemId>>,
}

impl Builder {
    fn push_row<'a>(&mut self, tokens: impl Iterator<Item = &'a str>) {
        let mut row: Vec<ItemId> = Vec::new();
        for tok in tokens {
            let next = self.names.len() as ItemId;
            let id = *self.ids.entry(tok.to_string()).or_insert_with(|| {
                self.names.push(tok.to_string());
                next
            });
            row.push(id);
        }
        row.sort_unstable();
        row.dedup();
        self.rows.push(row);
    }

    fn finish(self, labels: &[bool]) -> Result<TransactionDatabase, DatasetError> {
        let n = self.rows.len();
        if labels.len() != n {
            return Err(DatasetError::CountMismatch {
                labels: labels.len(),
                transactions: n,
            });
        }
        if n == 0 {
            return Err(DatasetError::Empty);
        }
        let num_positive = labels.iter().filter(|&&l| l).count();
        if num_positive == 0 || num_positive == n {
            return Err(DatasetError::SingleClass {
                positive: num_positive,
                total: n,
            });
        }
        if self.names.iter().any(|s| s.is_empty()) {
            return Err(DatasetError::EmptyItemName);
        }
        let mut item_bitsets = vec![Bitset::zeros(n); self.names.len()];
        for (t, row) in self.rows.iter().enumerate() {
            for &i in row {
                item_bitsets[i as usize].set(t);
            }
        }
        let mut positive_bitset = Bitset::zeros(n);
        for (t, &l) in labels.iter().enumerate() {
            if l {
                positive_bitset.set(t);
            }
        }
        let item_support = item_bitsets.iter().map(Bitset::count_ones).collect();
        Ok(TransactionDatabase {
            item_names: self.names,
            item_bitsets,
            item_support,
            positive_bitset,
            num_transactions: n,
            num_positive,
        })
    }
}

fn read_text(path: &Path) -> Result<String, DatasetError> {
    let bytes = fs::read(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|e| {
        let line = e.as_bytes()[..e.utf8_error().valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
            + 1;
        DatasetError::Malformed {
            path: path.to_path_buf(),
            line,
            reason: "invalid UTF-8".into(),
        }
    })
}

fn parse_label(path: &Path, line: usize, token: &str) -> Result<bool, DatasetError> {
    match token {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(DatasetError::BadLabel {
            path: path.to_path_buf(),
            line,
            token: token.to_string(),
        }),
    }
}

fn parse_labels(path: &Path, text: &str) -> Result<Vec<bool>, DatasetError> {
    text.lines()
        .enumerate()
        .map(|(i, line)| parse_label(path, i + 1, line.trim()))
        .collect()
}

fn load_csv(path: &Path) -> Result<TransactionDatabase, DatasetError> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let malformed = |line: usize, reason: String| DatasetError::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let header = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    if header.is_empty() {
        return Err(DatasetError::Empty);
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| malformed(line, e.to_string()))?;
        if record.len() != names.len() + 1 {
            return Err(malformed(
                line,
                format!("expected {} columns, found {}", names.len() + 1, record.len()),
            ));
        }
        labels.push(parse_label(path, line, &record[0])?);
        let row = record
            .iter()
            .skip(1)
            .map(|cell| match cell {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(malformed(line, format!("item indicator {other:?} is not 0 or 1"))),
            })
            .collect::<Result<Vec<bool>, _>>()?;
        rows.push(row);
    }
    TransactionDatabase::from_matrix(names, &rows, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toy() -> TransactionDatabase {
        TransactionDatabase::from_transactions(
            &[vec!["a", "b"], vec!["a", "b", "c"], vec!["c"]],
            &[true, true, false],
        )
        .unwrap()
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn loads_toy_files() {
        let dir = tempfile::tempdir().unwrap();
        let t = write(&dir, "t.txt", "a b\na b c\nc\n");
        let l = write(&dir, "l.txt", "1\n1\n0\n");
        let db = TransactionDatabase::load(&t, Some(&l)).unwrap();
        assert_eq!(db.num_transactions(), 3);
        assert_eq!(db.num_positive(), 2);
        assert_eq!(db.item_names(), &["a", "b", "c"]);
        let a = db.item_bitset(0);
        assert_eq!((a.get(0), a.get(1), a.get(2)), (true, true, false));
    }

    #[test]
    fn label_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let t = write(&dir, "t.txt", "a b\na b c\nc\n");
        let l = write(&dir, "l.txt", "1\n0\n");
        let err = TransactionDatabase::load(&t, Some(&l)).unwrap_err();
        assert!(err.to_string().contains("label/transaction count mismatch"), "{err}");
    }

    #[test]
    fn single_class_rejected() {
        let err = TransactionDatabase::from_transactions(&[vec!["a"], vec!["b"]], &[true, true])
            .unwrap_err();
        assert!(err.to_string().contains("single-class labels"));
    }

    #[test]
    fn bad_label_token_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let t = write(&dir, "t.txt", "a\nb\n");
        let l = write(&dir, "l.txt", "1\nyes\n");
        match TransactionDatabase::load(&t, Some(&l)).unwrap_err() {
            DatasetError::BadLabel { line, token, .. } => {
                assert_eq!(line, 2);
                assert_eq!(token, "yes");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_database_rejected() {
        let empty: [Vec<&str>; 0] = [];
        assert!(matches!(
            TransactionDatabase::from_transactions(&empty, &[]),
            Err(DatasetError::Empty)
        ));
    }

    #[test]
    fn blank_lines_are_empty_transactions_and_duplicates_collapse() {
        let dir = tempfile::tempdir().unwrap();
        let t = write(&dir, "t.txt", "a a b\n\nb\n");
        let l = write(&dir, "l.txt", "1\n0\n0\n");
        let db = TransactionDatabase::load(&t, Some(&l)).unwrap();
        assert_eq!(db.num_transactions(), 3);
        assert_eq!(db.support_of(&[0]).unwrap().total, 1);
        assert_eq!(db.support_of(&[]).unwrap().total, 3);
    }

    #[test]
    fn csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "label,a,b,c\n1,1,1,0\n1,1,1,1\n0,0,0,1\n");
        let db = TransactionDatabase::load(&p, None).unwrap();
        assert_eq!(db.item_names(), &["a", "b", "c"]);
        assert_eq!(db.support_of(&[0, 1]).unwrap(), PatternSupport { total: 2, positive: 2 });

        let bad = write(&dir, "e.csv", "label,a\n1,1\n0,2\n");
        match TransactionDatabase::load(&bad, None).unwrap_err() {
            DatasetError::Malformed { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn supports_on_toy() {
        let db = toy();
        assert_eq!(db.support_of(&[]).unwrap(), PatternSupport { total: 3, positive: 2 });
        assert_eq!(db.support_of(&[0, 1]).unwrap(), PatternSupport { total: 2, positive: 2 });
        assert_eq!(db.support_of(&[0, 2]).unwrap(), PatternSupport { total: 1, positive: 1 });
        assert!(matches!(
            db.support_of(&[7]),
            Err(DatasetError::ItemOutOfRange { id: 7, .. })
        ));
    }

    #[test]
    fn missing_file_names_path() {
        let err = TransactionDatabase::load(Path::new("/nonexistent/tx.txt"), Some(Path::new("x")))
            .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/tx.txt"));
    }
}
