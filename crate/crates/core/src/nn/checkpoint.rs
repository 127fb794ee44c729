use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::graph::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::io::{decode_container, encode_container, write_atomic};

const MAGIC: &[u8; 4] = b"YCNN";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header<T> {
    topology: T,
    params: Vec<ParamSpec>,
}

#[derive(Serialize, Deserialize)]
struct ParamSpec {
    name: String,
    shape: Vec<usize>,
}

pub fn encode_params<T: Serialize>(topology: &T, params: &ParamStore) -> Result<Vec<u8>> {
    let header = Header {
        topology,
        params: params
            .iter()
            .map(|(name, t)| ParamSpec {
                name: name.to_string(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let payload: Vec<f64> = params.iter().flat_map(|(_, t)| t.data().iter().copied()).collect();
    encode_container(MAGIC, VERSION, &header, &payload)
}

pub fn decode_params<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<(T, ParamStore)> {
    let (header, payload): (Header<T>, Vec<f64>) = decode_container(path, bytes, MAGIC, VERSION)?;
    let expected: usize = header.params.iter().map(|p| p.shape.iter().product::<usize>()).sum();
    if expected != payload.len() {
        return Err(Error::format(
            path,
            format!("header describes {expected} values, payload has {}", payload.len()),
        ));
    }
    let mut store = ParamStore::new();
    let mut rest = payload.as_slice();
    for spec in header.params {
        let n = spec.shape.iter().product();
        let (head, tail) = rest.split_at(n);
        store.add(spec.name, Tensor::new(spec.shape, head.to_vec())?);
        rest = tail;
    }
    Ok((header.topology, store))
}

/// Writes parameters and a caller-defined topology header atomically.
pub fn save_params<T: Serialize>(path: &Path, topology: &T, params: &ParamStore) -> Result<()> {
    write_atomic(path, &encode_params(topology, params)?)
}

pub fn load_params<T: DeserializeOwned>(path: &Path) -> Result<(T, ParamStore)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_params(path, &bytes)
}
