//! Versioned JSON serialization of fitted models.
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! saved model reloads bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Alphabet, Dataset, Sequence};
use crate::error::{Error, Result};
use crate::gp::{FullGpModel, FullState};
use crate::kernel::KernelConfig;
use crate::likelihood::Likelihood;
use crate::linalg::Factor;
use crate::sparse::{InducingSet, SparseGpModel, SparseState};

pub const FORMAT: &str = "stringgp-model";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Body {
    Full {
        train: Dataset,
        state: FullState,
    },
    Sparse {
        alphabet: Alphabet,
        inducing: Vec<Sequence>,
        kzz: Factor,
        state: SparseState,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    format: String,
    version: u32,
    kernel: KernelConfig,
    likelihood: Likelihood,
    model: Body,
}

fn write_envelope<W: Write>(env: &Envelope, out: W) -> Result<()> {
    serde_json::to_writer(out, env)?;
    Ok(())
}

fn read_envelope<R: Read>(input: R) -> Result<Envelope> {
    let env: Envelope = serde_json::from_reader(input)?;
    if env.format != FORMAT {
        return Err(Error::ModelFormat(format!("unexpected format tag {:?}", env.format)));
    }
    if env.version != VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {}", env.version)));
    }
    Ok(env)
}

pub fn write_full<W: Write>(model: &FullGpModel, out: W) -> Result<()> {
    write_envelope(
        &Envelope {
            format: FORMAT.into(),
            version: VERSION,
            kernel: *model.kernel_config(),
            likelihood: *model.likelihood(),
            model: Body::Full {
                train: model.train().clone(),
                state: model.state().clone(),
            },
        },
        out,
    )
}

pub fn read_full<R: Read>(input: R) -> Result<FullGpModel> {
    let env = read_envelope(input)?;
    match env.model {
        Body::Full { train, state } => Ok(FullGpModel::from_parts(train, env.kernel, env.likelihood, state)),
        Body::Sparse { .. } => Err(Error::ModelFormat("file holds a sparse model".into())),
    }
}

pub fn write_sparse<W: Write>(model: &SparseGpModel, alphabet: &Alphabet, out: W) -> Result<()> {
    write_envelope(
        &Envelope {
            format: FORMAT.into(),
            version: VERSION,
            kernel: *model.kernel_config(),
            likelihood: *model.likelihood(),
            model: Body::Sparse {
                alphabet: alphabet.clone(),
                inducing: model.inducing().points().to_vec(),
                kzz: model.kzz_factor().clone(),
                state: model.state().clone(),
            },
        },
        out,
    )
}

pub fn read_sparse<R: Read>(input: R) -> Result<SparseGpModel> {
    let env = read_envelope(input)?;
    match env.model {
        Body::Sparse {
            alphabet,
            inducing,
            kzz,
            state,
        } => {
            let z = InducingSet::new(inducing, &alphabet)?;
            if kzz.dim() != z.len() {
                return Err(Error::ModelFormat("inducing factor does not match the inducing set".into()));
            }
            Ok(SparseGpModel::from_parts(z, env.kernel, env.likelihood, kzz, state))
        }
        Body::Full { .. } => Err(Error::ModelFormat("file holds a full model".into())),
    }
}

pub fn save_full(model: &FullGpModel, path: &Path) -> Result<()> {
    write_full(model, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_full(path: &Path) -> Result<FullGpModel> {
    read_full(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_sparse(model: &SparseGpModel, alphabet: &Alphabet, path: &Path) -> Result<()> {
    write_sparse(model, alphabet, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_sparse(path: &Path) -> Result<SparseGpModel> {
    read_sparse(std::io::BufReader::new(std::fs::File::open(path)?))
}
