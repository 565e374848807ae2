//! Dataset ingestion and preprocessing: CSV loading with row-level
//! rejection, stratified train/test splitting, and train-statistics
//! z-scoring.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DekError, Result};
use crate::matrix::Matrix;
use crate::model::Task;

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Class ids into `names`; ids are ranks in the sorted label dictionary,
    /// so they are stable across row orderings.
    Labels { ids: Vec<usize>, names: Vec<String> },
    Values(Vec<f64>),
}

/// Per-column standardization statistics captured from a training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub target: Target,
    pub feature_names: Vec<String>,
    /// Set once standardization has been applied; always the training
    /// split's statistics, also on a test split.
    pub standardization: Option<Vec<ColumnStats>>,
}

impl Dataset {
    pub fn from_parts(features: Matrix, target: Target, feature_names: Vec<String>) -> Result<Self> {
        let n = match &target {
            Target::Labels { ids, .. } => ids.len(),
            Target::Values(v) => v.len(),
        };
        if n != features.rows() {
            return Err(DekError::DimensionMismatch {
                context: "dataset target length".into(),
                expected: features.rows(),
                actual: n,
            });
        }
        if feature_names.len() != features.cols() {
            return Err(DekError::DimensionMismatch {
                context: "feature names".into(),
                expected: features.cols(),
                actual: feature_names.len(),
            });
        }
        Ok(Dataset {
            features,
            target,
            feature_names,
            standardization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn task(&self) -> Task {
        match self.target {
            Target::Labels { .. } => Task::Classification,
            Target::Values(_) => Task::Regression,
        }
    }

    pub fn labels(&self) -> Result<&[usize]> {
        match &self.target {
            Target::Labels { ids, .. } => Ok(ids),
            Target::Values(_) => Err(DekError::InvalidInput(
                "regression dataset has no class labels".into(),
            )),
        }
    }

    pub fn label_names(&self) -> Result<&[String]> {
        match &self.target {
            Target::Labels { names, .. } => Ok(names),
            Target::Values(_) => Err(DekError::InvalidInput(
                "regression dataset has no label dictionary".into(),
            )),
        }
    }

    pub fn values(&self) -> Result<&[f64]> {
        match &self.target {
            Target::Values(v) => Ok(v),
            Target::Labels { .. } => Err(DekError::InvalidInput(
                "classification dataset has no continuous target".into(),
            )),
        }
    }

    pub fn n_classes(&self) -> usize {
        match &self.target {
            Target::Labels { names, .. } => names.len(),
            Target::Values(_) => 0,
        }
    }

    fn select(&self, indices: &[usize]) -> Dataset {
        let rows: Vec<Vec<f64>> = indices.iter().map(|&i| self.features.row(i).to_vec()).collect();
        let features = Matrix::from_rows(&rows).expect("uniform row widths");
        let target = match &self.target {
            Target::Labels { ids, names } => Target::Labels {
                ids: indices.iter().map(|&i| ids[i]).collect(),
                names: names.clone(),
            },
            Target::Values(v) => Target::Values(indices.iter().map(|&i| v[i]).collect()),
        };
        Dataset {
            features,
            target,
            feature_names: self.feature_names.clone(),
            standardization: self.standardization.clone(),
        }
    }
}

/// Which column of the file holds the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSpec {
    Name(String),
    Index(usize),
}

#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub target: ColumnSpec,
    pub task: Task,
    pub delimiter: u8,
    pub has_header: bool,
}

impl CsvSchema {
    pub fn new(target: ColumnSpec, task: Task) -> Self {
        CsvSchema {
            target,
            task,
            delimiter: b',',
            has_header: true,
        }
    }
}

#[derive(Debug)]
pub struct LoadOutcome {
    pub dataset: Dataset,
    /// Rows dropped because a cell failed to parse or was missing.
    pub rejected_rows: usize,
}

/// Loads a delimited text file. Rows with unparseable or missing cells are
/// rejected and counted; more than 50% rejections is a hard error.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<LoadOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DekError::CsvFormat {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;

    let headers: Vec<String> = if schema.has_header {
        reader
            .headers()
            .map_err(|e| DekError::CsvFormat {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?
            .iter()
            .map(|s| s.to_string())
            .collect()
    } else {
        Vec::new()
    };

    let mut raw_rows: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DekError::CsvFormat {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        raw_rows.push(record.iter().map(|s| s.to_string()).collect());
    }
    if raw_rows.is_empty() {
        return Err(DekError::Empty(format!("no data rows in {}", path.display())));
    }

    let width = if schema.has_header {
        headers.len()
    } else {
        raw_rows[0].len()
    };
    let target_idx = match &schema.target {
        ColumnSpec::Index(i) => {
            if *i >= width {
                return Err(DekError::CsvFormat {
                    path: path.display().to_string(),
                    reason: format!("target column index {i} out of range (width {width})"),
                });
            }
            *i
        }
        ColumnSpec::Name(name) => {
            if !schema.has_header {
                return Err(DekError::InvalidConfig(
                    "target column by name requires a header row".into(),
                ));
            }
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DekError::CsvFormat {
                    path: path.display().to_string(),
                    reason: format!("target column '{name}' not found in header"),
                })?
        }
    };

    let feature_names: Vec<String> = if schema.has_header {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target_idx)
            .map(|(_, h)| h.clone())
            .collect()
    } else {
        (0..width)
            .filter(|&i| i != target_idx)
            .map(|i| format!("col{i}"))
            .collect()
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_targets: Vec<String> = Vec::new();
    let mut rejected = 0usize;
    'rows: for record in &raw_rows {
        if record.len() != width {
            rejected += 1;
            continue;
        }
        let mut features = Vec::with_capacity(width - 1);
        for (i, cell) in record.iter().enumerate() {
            if i == target_idx {
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => features.push(v),
                _ => {
                    rejected += 1;
                    continue 'rows;
                }
            }
        }
        let target_cell = &record[target_idx];
        if target_cell.is_empty() {
            rejected += 1;
            continue;
        }
        if schema.task == Task::Regression {
            match target_cell.parse::<f64>() {
                Ok(v) if v.is_finite() => {}
                _ => {
                    rejected += 1;
                    continue;
                }
            }
        }
        rows.push(features);
        raw_targets.push(target_cell.clone());
    }

    if rejected * 2 > raw_rows.len() {
        return Err(DekError::CsvFormat {
            path: path.display().to_string(),
            reason: format!("{rejected} of {} rows rejected", raw_rows.len()),
        });
    }
    if rows.is_empty() {
        return Err(DekError::Empty(format!(
            "all rows of {} were rejected",
            path.display()
        )));
    }

    let features = Matrix::from_rows(&rows)?;
    let target = match schema.task {
        Task::Regression => Target::Values(
            raw_targets
                .iter()
                .map(|s| s.parse::<f64>().expect("validated above"))
                .collect(),
        ),
        Task::Classification => {
            // Stable label dictionary: sorted unique label strings.
            let names: Vec<String> = raw_targets
                .iter()
                .cloned()
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            let index: BTreeMap<&String, usize> =
                names.iter().enumerate().map(|(i, n)| (n, i)).collect();
            Target::Labels {
                ids: raw_targets.iter().map(|t| index[t]).collect(),
                names,
            }
        }
    };

    Ok(LoadOutcome {
        dataset: Dataset::from_parts(features, target, feature_names)?,
        rejected_rows: rejected,
    })
}

#[derive(Debug)]
pub struct SplitOutcome {
    pub train: Dataset,
    pub test: Dataset,
    pub warnings: Vec<String>,
}

/// Seeded shuffle then slice. Classification splits are stratified per
/// class with rounding extra samples to train; a class with a single member
/// is placed in train with a warning.
pub fn split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<SplitOutcome> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DekError::InvalidConfig(format!(
            "split fraction must lie in (0,1), got {fraction}"
        )));
    }
    if dataset.len() < 2 {
        return Err(DekError::InvalidInput("cannot split fewer than 2 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut train_idx: Vec<usize> = Vec::new();
    let mut test_idx: Vec<usize> = Vec::new();

    match &dataset.target {
        Target::Labels { ids, names } => {
            for class in 0..names.len() {
                let mut members: Vec<usize> =
                    (0..ids.len()).filter(|&i| ids[i] == class).collect();
                if members.is_empty() {
                    continue;
                }
                if members.len() == 1 {
                    warnings.push(format!(
                        "class '{}' has a single member; placed in train",
                        names[class]
                    ));
                    train_idx.push(members[0]);
                    continue;
                }
                members.shuffle(&mut rng);
                let take = ((fraction * members.len() as f64).ceil() as usize)
                    .clamp(1, members.len());
                train_idx.extend_from_slice(&members[..take]);
                test_idx.extend_from_slice(&members[take..]);
            }
        }
        Target::Values(_) => {
            let mut all: Vec<usize> = (0..dataset.len()).collect();
            all.shuffle(&mut rng);
            let take = ((fraction * all.len() as f64).ceil() as usize).clamp(1, all.len());
            train_idx.extend_from_slice(&all[..take]);
            test_idx.extend_from_slice(&all[take..]);
        }
    }

    // Remove per-class blocking so downstream folds and batches mix classes.
    train_idx.shuffle(&mut rng);
    test_idx.shuffle(&mut rng);

    Ok(SplitOutcome {
        train: dataset.select(&train_idx),
        test: dataset.select(&test_idx),
        warnings,
    })
}

#[derive(Debug)]
pub struct StandardizeOutcome {
    pub stats: Vec<ColumnStats>,
    /// Columns left unscaled because the training split had no variance.
    pub constant_columns: Vec<usize>,
}

const STD_FLOOR: f64 = 1e-12;

/// Per-feature z-scoring with statistics computed on the training split
/// only and applied identically to the test split. Zero-variance features
/// pass through unscaled.
pub fn standardize(train: &mut Dataset, test: &mut Dataset) -> Result<StandardizeOutcome> {
    if train.is_empty() {
        return Err(DekError::Empty("standardize on an empty training split".into()));
    }
    if test.dim() != train.dim() && !test.is_empty() {
        return Err(DekError::DimensionMismatch {
            context: "standardize test split width".into(),
            expected: train.dim(),
            actual: test.dim(),
        });
    }
    let n = train.len() as f64;
    let d = train.dim();
    let mut stats = Vec::with_capacity(d);
    let mut constant_columns = Vec::new();
    for c in 0..d {
        let mean = (0..train.len()).map(|r| train.features.get(r, c)).sum::<f64>() / n;
        let var = (0..train.len())
            .map(|r| {
                let v = train.features.get(r, c) - mean;
                v * v
            })
            .sum::<f64>()
            / n;
        let std = var.sqrt();
        if std <= STD_FLOOR {
            constant_columns.push(c);
            stats.push(ColumnStats { mean: 0.0, std: 1.0 });
        } else {
            stats.push(ColumnStats { mean, std });
        }
    }
    for ds in [&mut *train, &mut *test] {
        for r in 0..ds.len() {
            let row = ds.features.row_mut(r);
            for (c, s) in stats.iter().enumerate() {
                row[c] = (row[c] - s.mean) / s.std;
            }
        }
        ds.standardization = Some(stats.clone());
    }
    Ok(StandardizeOutcome {
        stats,
        constant_columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_row_file_with_integer_target() {
        let f = write_temp("a,b,label\n1,2,0\n3,4,1\n5,6,0\n");
        let schema = CsvSchema::new(ColumnSpec::Name("label".into()), Task::Classification);
        let out = load_csv(f.path(), &schema).unwrap();
        assert_eq!(out.dataset.len(), 3);
        assert_eq!(out.dataset.dim(), 2);
        assert_eq!(out.dataset.label_names().unwrap(), &["0", "1"]);
        assert_eq!(out.dataset.labels().unwrap(), &[0, 1, 0]);
        assert_eq!(out.rejected_rows, 0);
    }

    #[test]
    fn malformed_rows_are_rejected_and_counted() {
        let mut content = String::from("a,b,label\n");
        for i in 0..99 {
            content.push_str(&format!("{i},{},x\n", i * 2));
        }
        content.push_str("oops,3,x\n");
        let f = write_temp(&content);
        let schema = CsvSchema::new(ColumnSpec::Name("label".into()), Task::Classification);
        let out = load_csv(f.path(), &schema).unwrap();
        assert_eq!(out.dataset.len(), 99);
        assert_eq!(out.rejected_rows, 1);
    }

    #[test]
    fn mostly_malformed_file_is_a_hard_error() {
        let f = write_temp("a,label\nx,0\ny,1\n1,0\n");
        let schema = CsvSchema::new(ColumnSpec::Name("label".into()), Task::Classification);
        assert!(load_csv(f.path(), &schema).is_err());
    }

    #[test]
    fn label_dictionary_is_sorted_and_stable() {
        let f = write_temp("a,label\n1,zebra\n2,apple\n3,zebra\n");
        let schema = CsvSchema::new(ColumnSpec::Name("label".into()), Task::Classification);
        let out = load_csv(f.path(), &schema).unwrap();
        assert_eq!(out.dataset.label_names().unwrap(), &["apple", "zebra"]);
        assert_eq!(out.dataset.labels().unwrap(), &[1, 0, 1]);
    }

    #[test]
    fn pima_file_loads_with_published_shape() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../data/pima.csv");
        if !path.exists() {
            panic!("data/pima.csv missing from repository");
        }
        let schema = CsvSchema::new(ColumnSpec::Name("class".into()), Task::Classification);
        let out = load_csv(&path, &schema).unwrap();
        assert_eq!(out.dataset.len(), 768);
        assert_eq!(out.dataset.dim(), 8);
        assert_eq!(out.dataset.n_classes(), 2);
        assert_eq!(out.rejected_rows, 0);
    }

    fn balanced_dataset(n_per_class: usize) -> Dataset {
        let n = n_per_class * 2;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let ids: Vec<usize> = (0..n).map(|i| i % 2).collect();
        Dataset::from_parts(
            Matrix::from_rows(&rows).unwrap(),
            Target::Labels {
                ids,
                names: vec!["a".into(), "b".into()],
            },
            vec!["f0".into(), "f1".into()],
        )
        .unwrap()
    }

    #[test]
    fn stratified_half_split_is_balanced() {
        let ds = balanced_dataset(50);
        let out = split(&ds, 0.5, 7).unwrap();
        assert_eq!(out.train.len(), 50);
        assert_eq!(out.test.len(), 50);
        for side in [&out.train, &out.test] {
            let ones = side.labels().unwrap().iter().filter(|&&c| c == 1).count();
            assert_eq!(ones, 25);
        }
    }

    #[test]
    fn same_seed_gives_identical_partition() {
        let ds = balanced_dataset(20);
        let a = split(&ds, 0.3, 99).unwrap();
        let b = split(&ds, 0.3, 99).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn seventy_five_percent_split_rounds_to_train() {
        // 36 "identities" with 4 members each: 3 train / 1 test per class.
        let mut rows = Vec::new();
        let mut ids = Vec::new();
        for class in 0..36usize {
            for m in 0..4usize {
                rows.push(vec![class as f64, m as f64]);
                ids.push(class);
            }
        }
        let ds = Dataset::from_parts(
            Matrix::from_rows(&rows).unwrap(),
            Target::Labels {
                ids,
                names: (0..36).map(|c| c.to_string()).collect(),
            },
            vec!["f0".into(), "f1".into()],
        )
        .unwrap();
        let out = split(&ds, 0.75, 1).unwrap();
        assert_eq!(out.train.len(), 108);
        assert_eq!(out.test.len(), 36);
        for class in 0..36 {
            let n_train = out
                .train
                .labels()
                .unwrap()
                .iter()
                .filter(|&&c| c == class)
                .count();
            assert_eq!(n_train, 3);
        }
    }

    #[test]
    fn single_member_class_lands_in_train_with_warning() {
        let ds = Dataset::from_parts(
            Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap(),
            Target::Labels {
                ids: vec![0, 0, 0, 1],
                names: vec!["big".into(), "lonely".into()],
            },
            vec!["f0".into()],
        )
        .unwrap();
        let out = split(&ds, 0.5, 0).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.train.labels().unwrap().contains(&1));
        assert!(!out.test.labels().unwrap().contains(&1));
    }

    #[test]
    fn standardize_uses_train_statistics_only() {
        let mut train = Dataset::from_parts(
            Matrix::from_rows(&[vec![8.0], vec![12.0]]).unwrap(),
            Target::Values(vec![0.0, 1.0]),
            vec!["f0".into()],
        )
        .unwrap();
        let mut test = Dataset::from_parts(
            Matrix::from_rows(&[vec![12.0]]).unwrap(),
            Target::Values(vec![0.5]),
            vec!["f0".into()],
        )
        .unwrap();
        let out = standardize(&mut train, &mut test).unwrap();
        // mean 10, population std 2 -> 12 maps to 1.0 on both splits.
        assert!((out.stats[0].mean - 10.0).abs() < 1e-12);
        assert!((out.stats[0].std - 2.0).abs() < 1e-12);
        assert!((test.features.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((train.features.get(1, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn test_values_never_influence_the_statistics() {
        let make_test = |v: f64| {
            Dataset::from_parts(
                Matrix::from_rows(&[vec![v]]).unwrap(),
                Target::Values(vec![0.0]),
                vec!["f0".into()],
            )
            .unwrap()
        };
        let base = Dataset::from_parts(
            Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap(),
            Target::Values(vec![0.0, 1.0]),
            vec!["f0".into()],
        )
        .unwrap();
        let mut train_a = base.clone();
        let mut test_a = make_test(5.0);
        let a = standardize(&mut train_a, &mut test_a).unwrap();
        let mut train_b = base.clone();
        let mut test_b = make_test(-123.0);
        let b = standardize(&mut train_b, &mut test_b).unwrap();
        assert_eq!(a.stats, b.stats);
        assert_eq!(train_a, train_b);
        // Train mean 1, std 1: test value 5 -> 4.0 under train stats.
        assert!((test_a.features.get(0, 0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_passes_through_with_warning() {
        let mut train = Dataset::from_parts(
            Matrix::from_rows(&[vec![3.0, 1.0], vec![3.0, 2.0]]).unwrap(),
            Target::Values(vec![0.0, 1.0]),
            vec!["c".into(), "v".into()],
        )
        .unwrap();
        let mut test = Dataset::from_parts(
            Matrix::from_rows(&[vec![3.0, 3.0]]).unwrap(),
            Target::Values(vec![0.0]),
            vec!["c".into(), "v".into()],
        )
        .unwrap();
        let out = standardize(&mut train, &mut test).unwrap();
        assert_eq!(out.constant_columns, vec![0]);
        assert_eq!(train.features.get(0, 0), 3.0);
        assert_eq!(test.features.get(0, 0), 3.0);
    }
}
