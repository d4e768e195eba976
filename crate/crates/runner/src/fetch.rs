//! Opt-in MNIST download with checksum verification.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use md5::{Digest, Md5};
use thiserror::Error;

pub const MIRRORS: [&str; 2] = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
];

/// Archive name and MD5 of the gzipped file.
pub const MNIST_FILES: [(&str, &str); 4] = [
    ("train-images-idx3-ubyte.gz", "f68b3c2dcbeaaa9fbdd348bbdeb94873"),
    ("train-labels-idx1-ubyte.gz", "d53e105ee54ea40749a09fcbcd1e9432"),
    ("t10k-images-idx3-ubyte.gz", "9fb629c4189551a2d022fa330f9573f3"),
    ("t10k-labels-idx1-ubyte.gz", "ec29112dd5afa0611ce80d1b7f02629c"),
];

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("{name}: checksum {got}, expected {want}")]
    Checksum { name: String, got: String, want: String },
    #[error("{name}: every mirror failed: {reasons}")]
    Download { name: String, reasons: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub fn md5_hex(bytes: &[u8]) -> String {
    format!("{:x}", Md5::digest(bytes))
}

/// Checks `gz` against `want` and returns the decompressed payload.
pub fn verify_and_inflate(name: &str, gz: &[u8], want: &str) -> Result<Vec<u8>, FetchError> {
    let got = md5_hex(gz);
    if got != want {
        return Err(FetchError::Checksum {
            name: name.into(),
            got,
            want: want.into(),
        });
    }
    let mut out = Vec::new();
    GzDecoder::new(gz).read_to_end(&mut out).map_err(|e| FetchError::Io {
        path: name.into(),
        source: e,
    })?;
    Ok(out)
}

fn download(url: &str) -> Result<Vec<u8>, String> {
    let resp = ureq::get(url).call().map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    resp.into_reader()
        .take(64 << 20)
        .read_to_end(&mut buf)
        .map_err(|e| e.to_string())?;
    Ok(buf)
}

/// Downloads the four MNIST archives into `dir`, verifies them and writes the
/// decompressed IDX files. Files already present are kept.
pub fn fetch_mnist(dir: &Path) -> Result<Vec<PathBuf>, FetchError> {
    fs::create_dir_all(dir).map_err(|e| FetchError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let mut written = Vec::new();
    for (name, md5) in MNIST_FILES {
        let target = dir.join(name.trim_end_matches(".gz"));
        if target.exists() {
            written.push(target);
            continue;
        }
        let mut reasons = Vec::new();
        let mut payload = None;
        for mirror in MIRRORS {
            match download(&format!("{mirror}{name}")) {
                Ok(gz) => match verify_and_inflate(name, &gz, md5) {
                    Ok(p) => {
                        payload = Some(p);
                        break;
                    }
                    Err(e) => reasons.push(format!("{mirror}: {e}")),
                },
                Err(e) => reasons.push(format!("{mirror}: {e}")),
            }
        }
        let Some(bytes) = payload else {
            return Err(FetchError::Download {
                name: name.into(),
                reasons: reasons.join("; "),
            });
        };
        let tmp = target.with_extension("partial");
        fs::write(&tmp, &bytes)
            .and_then(|_| fs::rename(&tmp, &target))
            .map_err(|e| FetchError::Io {
                path: target.display().to_string(),
                source: e,
            })?;
        written.push(target);
    }
    Ok(written)
}
