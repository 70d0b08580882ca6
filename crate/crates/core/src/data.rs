//! Synthetic generators, UCI parsers, train/test splits and CSV persistence.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::domain::{Alphabet, Dataset, Sequence, TargetKind, Targets};
use crate::error::{Error, Result};

pub const PROMOTER_LENGTH: usize = 57;
pub const SPLICE_LENGTH: usize = 60;

/// `length` characters over `{0,1}` encoding `bits`, most significant first.
fn bit_string(bits: u64, length: usize) -> String {
    (0..length)
        .rev()
        .map(|i| if i < 64 && (bits >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn random_bit_string<R: Rng + ?Sized>(rng: &mut R, length: usize) -> String {
    (0..length).map(|_| if rng.random_bool(0.5) { '1' } else { '0' }).collect()
}

/// Binary strings for the toy tasks: regression on the number of ones and
/// classification of a strict majority of ones. Strings are distinct
/// whenever `n <= 2^length`.
pub fn gen_binary_toy(n: usize, length: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let alphabet = Alphabet::binary();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<String> = if length <= 20 && n <= 1usize << length {
        index::sample(&mut rng, 1usize << length, n)
            .into_iter()
            .map(|b| bit_string(b as u64, length))
            .collect()
    } else if length > 20 {
        let mut seen = HashSet::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let s = random_bit_string(&mut rng, length);
            if seen.insert(s.clone()) {
                out.push(s);
            }
        }
        out
    } else {
        (0..n).map(|_| random_bit_string(&mut rng, length)).collect()
    };
    let inputs: Vec<Sequence> = raw.iter().map(|s| alphabet.validate(s)).collect::<Result<_>>()?;
    let ones: Vec<usize> = inputs.iter().map(|s| s.char_count('1')).collect();
    let reg = Dataset::new(
        alphabet.clone(),
        inputs.clone(),
        Targets::Real(ones.iter().map(|&c| c as f64).collect()),
    )?;
    let cls = Dataset::new(
        alphabet,
        inputs,
        Targets::Binary(ones.iter().map(|&c| 2 * c > length).collect()),
    )?;
    Ok((reg, cls))
}

/// Sequences over `{A,T}` with Poisson counts of rate `lambda0 * #A`.
/// Returns the dataset and the true rates.
pub fn gen_poisson_tf(n: usize, length: usize, lambda0: f64, seed: u64) -> Result<(Dataset, Vec<f64>)> {
    if !(lambda0 > 0.0 && lambda0.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda0 must be positive, got {lambda0}")));
    }
    let alphabet = Alphabet::new("AT".chars())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    for _ in 0..n {
        let s: String = (0..length).map(|_| if rng.random_bool(0.5) { 'A' } else { 'T' }).collect();
        let seq = alphabet.validate(&s)?;
        let rate = lambda0 * seq.char_count('A') as f64;
        let count = if rate > 0.0 {
            Poisson::new(rate)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(&mut rng) as u64
        } else {
            0
        };
        inputs.push(seq);
        rates.push(rate);
        counts.push(count);
    }
    Ok((Dataset::new(alphabet, inputs, Targets::Counts(counts))?, rates))
}

/// One `<class>,<name>,<sequence>` line of a UCI file, whitespace removed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRecord {
    pub label: String,
    pub name: String,
    pub sequence: String,
}

/// Splits a UCI line into its three fields. Surrounding whitespace is
/// trimmed, whitespace inside the sequence removed, and the sequence
/// uppercased.
pub fn parse_record(line: &str, lineno: usize) -> Result<RawRecord> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 3 {
        return Err(Error::MalformedLine {
            line: lineno,
            reason: format!("expected 3 comma-separated fields, found {}", fields.len()),
        });
    }
    let label = fields[0].trim().to_owned();
    let name = fields[1].trim().to_owned();
    let sequence: String = fields[2]
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_ascii_uppercase();
    if label.is_empty() || name.is_empty() || sequence.is_empty() {
        return Err(Error::MalformedLine {
            line: lineno,
            reason: "empty field".into(),
        });
    }
    Ok(RawRecord { label, name, sequence })
}

/// A parsed UCI file: a binary-labelled dataset plus the per-record
/// names and original class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct UciDataset {
    pub dataset: Dataset,
    pub names: Vec<String>,
    pub classes: Vec<String>,
}

fn parse_uci<R: Read>(
    reader: R,
    alphabet: Alphabet,
    length: usize,
    label_of: impl Fn(&str) -> Option<bool>,
) -> Result<UciDataset> {
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut names = Vec::new();
    let mut classes = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_record(line, lineno)?;
        let label = label_of(&rec.label).ok_or_else(|| Error::MalformedLine {
            line: lineno,
            reason: format!("unknown class {:?}", rec.label),
        })?;
        if rec.sequence.len() != length {
            return Err(Error::UnexpectedLength {
                line: lineno,
                expected: length,
                found: rec.sequence.chars().count(),
            });
        }
        let seq = alphabet.validate(&rec.sequence).map_err(|e| Error::InvalidRecord {
            line: lineno,
            source: Box::new(e),
        })?;
        inputs.push(seq);
        labels.push(label);
        names.push(rec.name);
        classes.push(rec.label);
    }
    Ok(UciDataset {
        dataset: Dataset::new(alphabet, inputs, Targets::Binary(labels))?,
        names,
        classes,
    })
}

/// UCI "molecular biology (promoter gene sequences)": class `+` is labelled 1.
pub fn parse_promoters<R: Read>(reader: R) -> Result<UciDataset> {
    parse_uci(reader, Alphabet::dna(), PROMOTER_LENGTH, |c| match c {
        "+" => Some(true),
        "-" => Some(false),
        _ => None,
    })
}

/// Alphabet of the splice-junction file: nucleotides plus the ambiguity
/// codes D, N, S and R.
pub fn splice_alphabet() -> Alphabet {
    Alphabet::new("ACGTDNSR".chars()).expect("static alphabet")
}

/// UCI "molecular biology (splice-junction gene sequences)": EI and IE
/// boundaries are labelled 1, N is labelled 0.
pub fn parse_splice<R: Read>(reader: R) -> Result<UciDataset> {
    parse_uci(reader, splice_alphabet(), SPLICE_LENGTH, |c| match c {
        "EI" | "IE" => Some(true),
        "N" => Some(false),
        _ => None,
    })
}

pub fn read_promoters(path: &Path) -> Result<UciDataset> {
    parse_promoters(std::fs::File::open(path)?)
}

pub fn read_splice(path: &Path) -> Result<UciDataset> {
    parse_splice(std::fs::File::open(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitKind {
    Fraction { train_fraction: f64 },
    Kfold { folds: usize },
    Fixed { train_n: usize, test_n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub kind: SplitKind,
    #[serde(default)]
    pub seed: u64,
}

impl SplitSpec {
    pub fn fraction(train_fraction: f64, seed: u64) -> Self {
        Self {
            kind: SplitKind::Fraction { train_fraction },
            seed,
        }
    }

    pub fn kfold(folds: usize, seed: u64) -> Self {
        Self {
            kind: SplitKind::Kfold { folds },
            seed,
        }
    }

    pub fn fixed(train_n: usize, test_n: usize, seed: u64) -> Self {
        Self {
            kind: SplitKind::Fixed { train_n, test_n },
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self.kind {
            SplitKind::Fraction { train_fraction: f } if !(f > 0.0 && f < 1.0) => {
                Err(Error::InvalidSpec(format!("train fraction {f} is outside (0, 1)")))
            }
            SplitKind::Kfold { folds } if folds < 2 || folds > n => {
                Err(Error::InvalidSpec(format!("{folds} folds for {n} points")))
            }
            SplitKind::Fixed { train_n, test_n } if train_n + test_n > n => Err(Error::InvalidSpec(format!(
                "{train_n} + {test_n} points requested from {n}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Row indices of one train/test partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Partition {
    pub fn apply(&self, data: &Dataset) -> (Dataset, Dataset) {
        (data.subset(&self.train), data.subset(&self.test))
    }
}

/// Seeded shuffle followed by partitioning. Fraction and fixed splits give
/// one partition; k-fold gives one per fold with that fold as the test set.
pub fn split(n: usize, spec: &SplitSpec) -> Result<Vec<Partition>> {
    spec.validate(n)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    Ok(match spec.kind {
        SplitKind::Fraction { train_fraction } => {
            let t = ((train_fraction * n as f64).round() as usize).min(n);
            vec![Partition {
                train: perm[..t].to_vec(),
                test: perm[t..].to_vec(),
            }]
        }
        SplitKind::Fixed { train_n, test_n } => vec![Partition {
            train: perm[..train_n].to_vec(),
            test: perm[train_n..train_n + test_n].to_vec(),
        }],
        SplitKind::Kfold { folds } => {
            let (base, extra) = (n / folds, n % folds);
            let mut start = 0;
            (0..folds)
                .map(|f| {
                    let size = base + usize::from(f < extra);
                    let test = perm[start..start + size].to_vec();
                    let train = perm[..start].iter().chain(&perm[start + size..]).copied().collect();
                    start += size;
                    Partition { train, test }
                })
                .collect()
        }
    })
}

fn format_targets(t: &Targets) -> Vec<String> {
    match t {
        Targets::Real(v) => v.iter().map(|x| x.to_string()).collect(),
        Targets::Binary(v) => v.iter().map(|&b| u8::from(b).to_string()).collect(),
        Targets::Counts(v) => v.iter().map(|c| c.to_string()).collect(),
    }
}

/// Writes `sequence,target` rows.
pub fn write_dataset_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sequence", "target"])?;
    for (x, t) in data.inputs().iter().zip(format_targets(data.targets())) {
        w.write_record([x.as_str(), &t])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `sequence,target` rows. An empty file is an error; a header
/// without rows gives an empty dataset.
pub fn read_dataset_csv<R: Read>(input: R, alphabet: Alphabet, kind: TargetKind) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = r.records();
    let header = match records.next() {
        None => return Err(Error::EmptyDataset),
        Some(h) => h?,
    };
    if header.len() != 2 || &header[0] != "sequence" || &header[1] != "target" {
        return Err(Error::MalformedLine {
            line: 1,
            reason: "expected header `sequence,target`".into(),
        });
    }
    let mut inputs = Vec::new();
    let mut targets = Targets::empty(kind);
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::MalformedLine {
                line,
                reason: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        let seq = alphabet.validate(&rec[0]).map_err(|e| Error::InvalidRecord {
            line,
            source: Box::new(e),
        })?;
        let bad = |what: &str| Error::MalformedLine {
            line,
            reason: format!("invalid {what} target {:?}", &rec[1]),
        };
        match &mut targets {
            Targets::Real(v) => v.push(rec[1].parse::<f64>().map_err(|_| bad("real"))?),
            Targets::Binary(v) => v.push(match &rec[1] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("binary")),
            }),
            Targets::Counts(v) => v.push(rec[1].parse::<u64>().map_err(|_| bad("count"))?),
        }
        inputs.push(seq);
    }
    Dataset::new(alphabet, inputs, targets)
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    write_dataset_csv(data, std::fs::File::create(path)?)
}

pub fn load_dataset(path: &Path, alphabet: Alphabet, kind: TargetKind) -> Result<Dataset> {
    read_dataset_csv(std::fs::File::open(path)?, alphabet, kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROMOTER: &str = "+,S10,\t\ttactagcaatacgcttgcgttcggtggttaagtatgtataatgcgcgggcttgtcgt";

    #[test]
    fn toy_labels() {
        let (reg, cls) = gen_binary_toy(1024, 10, 1).unwrap();
        let y = reg.y();
        let c = cls.y();
        let mut seen = HashSet::new();
        for (i, x) in reg.inputs().iter().enumerate() {
            assert!(seen.insert(x.clone()));
            if x.as_str() == "1111111111" {
                assert_eq!((y[i], c[i]), (10.0, 1.0));
            }
            if x.as_str() == "0000011111" {
                assert_eq!((y[i], c[i]), (5.0, 0.0));
            }
        }
        assert_eq!(seen.len(), 1024);
    }

    #[test]
    fn generators_are_reproducible() {
        assert_eq!(gen_binary_toy(50, 10, 4).unwrap(), gen_binary_toy(50, 10, 4).unwrap());
        assert_eq!(gen_poisson_tf(50, 10, 1.0, 4).unwrap(), gen_poisson_tf(50, 10, 1.0, 4).unwrap());
        assert!(gen_poisson_tf(5, 10, 0.0, 1).is_err());
    }

    #[test]
    fn poisson_all_t_has_zero_counts() {
        let (d, rates) = gen_poisson_tf(400, 3, 2.0, 8).unwrap();
        for (i, x) in d.inputs().iter().enumerate() {
            if x.as_str() == "TTT" {
                assert_eq!(rates[i], 0.0);
                assert_eq!(d.y()[i], 0.0);
            }
        }
    }

    #[test]
    fn promoter_line() {
        let u = parse_promoters(PROMOTER.as_bytes()).unwrap();
        assert_eq!(u.names, ["S10"]);
        assert_eq!(u.dataset.y(), [1.0]);
        assert!(u.dataset.inputs()[0].as_str().starts_with("TACTAGCA"));
        assert_eq!(u.dataset.inputs()[0].len(), PROMOTER_LENGTH);
    }

    #[test]
    fn parser_errors() {
        assert!(matches!(
            parse_promoters("+,S10".as_bytes()),
            Err(Error::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_promoters("+,S10,acgt\n".as_bytes()),
            Err(Error::UnexpectedLength { line: 1, expected: 57, found: 4 })
        ));
        let bad = format!("{PROMOTER}\n-,X,{}", "acgu".repeat(14) + "a");
        match parse_promoters(bad.as_bytes()) {
            Err(Error::InvalidRecord { line: 2, source }) => {
                assert!(matches!(*source, Error::InvalidCharacter { .. }))
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_promoters("?,S10,acgt".as_bytes()).is_err());
    }

    #[test]
    fn splice_lines() {
        let seq = "D".to_string() + &"ACGT".repeat(14) + "NSR";
        let text = format!("EI,A-1,  {seq}\r\nN,A-2,  {}\r\nIE,A-3, {}\r\n", "A".repeat(60), "C".repeat(60));
        let u = parse_splice(text.as_bytes()).unwrap();
        assert_eq!(u.dataset.y(), [1.0, 0.0, 1.0]);
        assert_eq!(u.classes, ["EI", "N", "IE"]);
        assert_eq!(u.dataset.inputs()[0].as_str(), seq);
    }

    #[test]
    fn split_sizes() {
        let p = split(100, &SplitSpec::fraction(0.6, 1)).unwrap();
        assert_eq!((p[0].train.len(), p[0].test.len()), (60, 40));
        let folds = split(106, &SplitSpec::kfold(10, 1)).unwrap();
        let mut sizes: Vec<_> = folds.iter().map(|f| f.test.len()).collect();
        sizes.sort();
        assert_eq!(sizes, [10, 10, 10, 10, 11, 11, 11, 11, 11, 11]);
        let mut all: Vec<_> = folds.iter().flat_map(|f| f.test.clone()).collect();
        all.sort();
        assert_eq!(all, (0..106).collect::<Vec<_>>());
        let f = split(3190, &SplitSpec::fixed(2000, 1190, 0)).unwrap();
        assert_eq!((f[0].train.len(), f[0].test.len()), (2000, 1190));
        assert!(split(10, &SplitSpec::fixed(8, 3, 0)).is_err());
        assert!(split(10, &SplitSpec::fraction(1.0, 0)).is_err());
        assert!(split(10, &SplitSpec::kfold(1, 0)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let (reg, cls) = gen_binary_toy(20, 6, 2).unwrap();
        let (pois, _) = gen_poisson_tf(20, 6, 1.5, 2).unwrap();
        for d in [reg, cls, pois] {
            let mut buf = Vec::new();
            write_dataset_csv(&d, &mut buf).unwrap();
            let back = read_dataset_csv(&buf[..], d.alphabet().clone(), d.targets().kind()).unwrap();
            assert_eq!(back, d);
        }
        let noisy = Dataset::new(
            Alphabet::binary(),
            vec![Alphabet::binary().validate("01").unwrap()],
            Targets::Real(vec![0.1 + 0.2]),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&noisy, &mut buf).unwrap();
        assert_eq!(read_dataset_csv(&buf[..], Alphabet::binary(), TargetKind::Real).unwrap(), noisy);
    }

    #[test]
    fn csv_edge_cases() {
        assert!(matches!(
            read_dataset_csv(&b""[..], Alphabet::binary(), TargetKind::Real),
            Err(Error::EmptyDataset)
        ));
        let d = read_dataset_csv(&b"sequence,target\n"[..], Alphabet::binary(), TargetKind::Real).unwrap();
        assert_eq!(d.len(), 0);
        assert!(matches!(
            read_dataset_csv(&b"sequence,target\n01,x\n"[..], Alphabet::binary(), TargetKind::Real),
            Err(Error::MalformedLine { line: 2, .. })
        ));
    }
}
