//! JSONL datasets and the synthetic generator.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_dataset, GeoObject, Location, Rect, WordSet};
use crate::num::Scalar;

/// On-disk form of one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: u64,
    pub lat: f64,
    pub lon: f64,
    pub words: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
}

impl ObjectRecord {
    pub fn into_object<T: Scalar>(self) -> Result<GeoObject<T>> {
        let words = WordSet::from_sorted(self.words).map_err(|reason| Error::InvalidObject { id: self.id, reason })?;
        let o = GeoObject {
            id: self.id,
            location: Location::new(T::lit(self.lon), T::lit(self.lat)),
            words,
            image_url: self.image_url,
            tags: self.tags,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn from_object<T: Scalar>(o: &GeoObject<T>) -> Self {
        Self {
            id: o.id,
            lat: o.location.lat.as_f64(),
            lon: o.location.lon.as_f64(),
            words: o.words.as_slice().to_vec(),
            image_url: o.image_url.clone(),
            tags: o.tags.clone(),
        }
    }
}

/// Parses one object per non-blank line and validates the whole dataset.
pub fn read_jsonl<T: Scalar, R: BufRead>(input: R) -> Result<Vec<GeoObject<T>>> {
    let mut objects = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ObjectRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let object = record.into_object().map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        objects.push(object);
    }
    validate_dataset(&objects)?;
    Ok(objects)
}

pub fn load_jsonl<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<GeoObject<T>>> {
    read_jsonl(BufReader::new(File::open(path)?))
}

pub fn write_jsonl<T: Scalar, W: Write>(objects: &[GeoObject<T>], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for o in objects {
        serde_json::to_writer(&mut out, &ObjectRecord::from_object(o)).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_jsonl<T: Scalar>(objects: &[GeoObject<T>], path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(objects, File::create(path)?)
}

/// Parameters of [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig<T: Scalar> {
    pub n: usize,
    pub vocab_size: u32,
    pub words_per_object_mean: f64,
    pub bbox: Rect<T>,
    pub seed: u64,
}

/// Draws `size` distinct Zipf(1.0) word ids from `0..vocab`. Falls back to
/// the lowest unused ids if the tail is too slow to reach.
pub fn sample_zipf_words<R: Rng>(rng: &mut R, zipf: &Zipf<f64>, vocab: u32, size: usize) -> WordSet {
    let size = size.min(vocab as usize);
    let mut words = BTreeSet::new();
    let mut attempts = 0;
    while words.len() < size && attempts < 64 * size {
        words.insert(zipf.sample(rng) as u32 - 1);
        attempts += 1;
    }
    let mut next = 0;
    while words.len() < size {
        words.insert(next);
        next += 1;
    }
    WordSet::from_iter(words)
}

/// Uniform locations in `bbox`, Poisson word counts (at least one) and
/// distinct Zipf-distributed words. Ids are `0..n`.
pub fn generate_synthetic<T: Scalar>(cfg: &SyntheticConfig<T>) -> Result<Vec<GeoObject<T>>> {
    if cfg.n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    if cfg.vocab_size == 0 || cfg.words_per_object_mean <= 0.0 {
        return Err(Error::InvalidConfig("vocabulary and mean word count must be positive".into()));
    }
    let b = &cfg.bbox;
    if !(b.min_lon <= b.max_lon && b.min_lat <= b.max_lat)
        || !Location::new(b.min_lon, b.min_lat).is_valid()
        || !Location::new(b.max_lon, b.max_lat).is_valid()
    {
        return Err(Error::InvalidConfig("bounding box out of range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let zipf = Zipf::new(cfg.vocab_size as f64, 1.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let sizes = Poisson::new(cfg.words_per_object_mean).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let (lon0, lon1) = (b.min_lon.as_f64(), b.max_lon.as_f64());
    let (lat0, lat1) = (b.min_lat.as_f64(), b.max_lat.as_f64());
    let objects = (0..cfg.n as u64)
        .map(|id| {
            let lon = rng.random_range(lon0..=lon1);
            let lat = rng.random_range(lat0..=lat1);
            let size = (sizes.sample(&mut rng) as usize).max(1);
            let words = sample_zipf_words(&mut rng, &zipf, cfg.vocab_size, size);
            let mut o = GeoObject::new(id, Location::new(T::lit(lon), T::lit(lat)), words);
            // rounding to T must not leave the box
            o.location.lon = o.location.lon.max(b.min_lon).min(b.max_lon);
            o.location.lat = o.location.lat.max(b.min_lat).min(b.max_lat);
            o
        })
        .collect();
    Ok(objects)
}
