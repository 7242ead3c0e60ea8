//! Domain types shared by every stage of the engine.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// A point in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Location<T: Scalar> {
    pub lon: T,
    pub lat: T,
}

impl<T: Scalar> Location<T> {
    pub fn new(lon: T, lat: T) -> Self {
        Self { lon, lat }
    }

    pub fn is_valid(&self) -> bool {
        let (lon, lat) = (self.lon.as_f64(), self.lat.as_f64());
        lon.is_finite()
            && lat.is_finite()
            && (-180.0..=180.0).contains(&lon)
            && (-90.0..=90.0).contains(&lat)
    }
}

/// Sorted, duplicate-free set of visual-word ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct WordSet(Vec<u32>);

impl WordSet {
    /// Accepts only strictly ascending input; never repairs.
    pub fn from_sorted(words: Vec<u32>) -> Result<Self, String> {
        if let Some(w) = words.windows(2).find(|w| w[0] >= w[1]) {
            return Err(if w[0] == w[1] {
                format!("duplicate word {}", w[0])
            } else {
                format!("words not sorted ascending ({} before {})", w[0], w[1])
            });
        }
        Ok(Self(words))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, word: u32) -> bool {
        self.0.binary_search(&word).is_ok()
    }

    /// Size of the intersection with `other` (linear merge).
    pub fn intersection_len(&self, other: &WordSet) -> usize {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn union_len(&self, other: &WordSet) -> usize {
        self.len() + other.len() - self.intersection_len(other)
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<u32> for WordSet {
    /// Sorts and deduplicates.
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        let mut v: Vec<u32> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }
}

impl TryFrom<Vec<u32>> for WordSet {
    type Error = String;

    fn try_from(v: Vec<u32>) -> Result<Self, String> {
        Self::from_sorted(v)
    }
}

impl From<WordSet> for Vec<u32> {
    fn from(w: WordSet) -> Self {
        w.0
    }
}

/// One database record.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoObject<T: Scalar> {
    pub id: u64,
    pub location: Location<T>,
    pub words: WordSet,
    pub image_url: Option<String>,
    pub tags: Option<Vec<String>>,
}

impl<T: Scalar> GeoObject<T> {
    pub fn new(id: u64, location: Location<T>, words: WordSet) -> Self {
        Self {
            id,
            location,
            words,
            image_url: None,
            tags: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.location.is_valid() {
            return Err(Error::InvalidObject {
                id: self.id,
                reason: format!(
                    "coordinates out of range (lon {}, lat {})",
                    self.location.lon, self.location.lat
                ),
            });
        }
        WordSet::from_sorted(self.words.0.clone())
            .map(drop)
            .map_err(|reason| Error::InvalidObject {
                id: self.id,
                reason,
            })
    }
}

/// A top-k interactive query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Query<T: Scalar> {
    pub location: Location<T>,
    pub words: WordSet,
    pub k: usize,
    /// Candidates shown per round.
    pub theta: usize,
    pub lambda: T,
}

impl<T: Scalar> Query<T> {
    pub const DEFAULT_K: usize = 20;
    pub const DEFAULT_THETA: usize = 8;

    pub fn new(location: Location<T>, words: WordSet) -> Self {
        Self {
            location,
            words,
            k: Self::DEFAULT_K,
            theta: Self::DEFAULT_THETA,
            lambda: T::lit(0.5),
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_theta(mut self, theta: usize) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_lambda(mut self, lambda: T) -> Self {
        self.lambda = lambda;
        self
    }

    /// Number of query words (`t`).
    pub fn dim_words(&self) -> usize {
        self.words.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidQuery(m.to_string()));
        if !self.location.is_valid() {
            return fail("location out of range");
        }
        if self.words.is_empty() {
            return fail("words must be non-empty");
        }
        if self.k < 1 {
            return fail("k must be at least 1");
        }
        if self.theta < 2 {
            return fail("theta must be at least 2");
        }
        let l = self.lambda.as_f64();
        if !(0.0..=1.0).contains(&l) {
            return fail("lambda must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Geographic weight plus one weight per query word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PreferenceVector<T: Scalar> {
    pub p0: T,
    pub pw: Vec<T>,
}

impl<T: Scalar> PreferenceVector<T> {
    pub fn new(p0: T, pw: Vec<T>) -> Result<Self> {
        let p = Self { p0, pw };
        if p.components().any(|x| !x.is_finite() || x < T::zero()) {
            return Err(Error::InvalidConfig(
                "preference weights must be finite and nonnegative".into(),
            ));
        }
        Ok(p)
    }

    /// `(1, 1, ..., 1)` with `t` word weights.
    pub fn uniform(t: usize) -> Self {
        Self {
            p0: T::one(),
            pw: vec![T::one(); t],
        }
    }

    /// Length `t + 1` dense form `(p0, p1..pt)`.
    pub fn to_dense(&self) -> Vec<T> {
        self.components().collect()
    }

    pub fn from_dense(v: &[T]) -> Self {
        Self {
            p0: v[0],
            pw: v[1..].to_vec(),
        }
    }

    pub fn components(&self) -> impl Iterator<Item = T> + '_ {
        std::iter::once(self.p0).chain(self.pw.iter().copied())
    }

    pub fn dot(&self, features: &[T]) -> T {
        debug_assert_eq!(features.len(), self.pw.len() + 1);
        self.components()
            .zip(features)
            .fold(T::zero(), |acc, (p, f)| acc + p * *f)
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            p0: self.p0 * c,
            pw: self.pw.iter().map(|&x| x * c).collect(),
        }
    }
}

/// One learned feedback fact: `chosen` was preferred over `rejected`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Constraint<T: Scalar> {
    pub chosen: u64,
    pub rejected: u64,
    pub round: usize,
    /// `phi(chosen) - phi(rejected)`, length `t + 1`.
    pub delta: Vec<T>,
}

/// The two dominance dimensions of one object under one query.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScorePair<T: Scalar> {
    pub proximity: T,
    pub similarity: T,
}

impl<T: Scalar> ScorePair<T> {
    pub fn new(proximity: T, similarity: T) -> Self {
        Self {
            proximity,
            similarity,
        }
    }

    pub fn sum(&self) -> T {
        self.proximity + self.similarity
    }
}

/// Axis-aligned rectangle in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Rect<T: Scalar> {
    pub min_lon: T,
    pub min_lat: T,
    pub max_lon: T,
    pub max_lat: T,
}

impl<T: Scalar> Rect<T> {
    pub fn point(p: Location<T>) -> Self {
        Self {
            min_lon: p.lon,
            min_lat: p.lat,
            max_lon: p.lon,
            max_lat: p.lat,
        }
    }

    pub fn expand(&mut self, other: &Rect<T>) {
        self.min_lon = self.min_lon.min(other.min_lon);
        self.min_lat = self.min_lat.min(other.min_lat);
        self.max_lon = self.max_lon.max(other.max_lon);
        self.max_lat = self.max_lat.max(other.max_lat);
    }

    pub fn bounding<I: IntoIterator<Item = Location<T>>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let mut r = Self::point(it.next()?);
        for p in it {
            r.expand(&Self::point(p));
        }
        Some(r)
    }

    pub fn contains(&self, p: Location<T>) -> bool {
        p.lon >= self.min_lon && p.lon <= self.max_lon && p.lat >= self.min_lat && p.lat <= self.max_lat
    }

    pub fn contains_rect(&self, r: &Rect<T>) -> bool {
        self.min_lon <= r.min_lon
            && self.min_lat <= r.min_lat
            && self.max_lon >= r.max_lon
            && self.max_lat >= r.max_lat
    }

    /// The point of the rectangle closest to `p`.
    pub fn nearest_point(&self, p: Location<T>) -> Location<T> {
        Location::new(
            p.lon.max(self.min_lon).min(self.max_lon),
            p.lat.max(self.min_lat).min(self.max_lat),
        )
    }

    pub fn center(&self) -> Location<T> {
        let two = T::lit(2.0);
        Location::new(
            (self.min_lon + self.max_lon) / two,
            (self.min_lat + self.max_lat) / two,
        )
    }
}

/// Planar distance frame frozen at index-build time.
///
/// Longitude differences are scaled by `lon_scale = cos(mean latitude)`;
/// `d_max` is the bounding-box diagonal in that scaled plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Frame<T: Scalar> {
    pub lon_scale: T,
    pub d_max: T,
}

impl<T: Scalar> Frame<T> {
    pub fn new(lon_scale: T, d_max: T) -> Self {
        Self { lon_scale, d_max }
    }

    pub fn distance(&self, a: Location<T>, b: Location<T>) -> T {
        let dx = (a.lon - b.lon) * self.lon_scale;
        let dy = a.lat - b.lat;
        (dx * dx + dy * dy).sqrt()
    }

    fn diagonal(&self, r: &Rect<T>) -> T {
        self.distance(
            Location::new(r.min_lon, r.min_lat),
            Location::new(r.max_lon, r.max_lat),
        )
    }
}

/// Result of [`validate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary<T: Scalar> {
    pub count: usize,
    pub bbox: Rect<T>,
    pub frame: Frame<T>,
    /// Set when the bounding box has zero diagonal.
    pub degenerate_extent: bool,
}

impl<T: Scalar> DatasetSummary<T> {
    pub fn d_max(&self) -> T {
        self.frame.d_max
    }
}

/// Checks ids and coordinates and derives the distance frame.
pub fn validate_dataset<T: Scalar>(objects: &[GeoObject<T>]) -> Result<DatasetSummary<T>> {
    if objects.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut seen = HashSet::with_capacity(objects.len());
    for o in objects {
        o.validate()?;
        if !seen.insert(o.id) {
            return Err(Error::DuplicateId(o.id));
        }
    }
    let bbox = Rect::bounding(objects.iter().map(|o| o.location)).expect("non-empty");
    let mean_lat = objects.iter().map(|o| o.location.lat.as_f64()).sum::<f64>()
        / objects.len() as f64;
    let lon_scale = T::lit(mean_lat.to_radians().cos());
    let mut frame = Frame::new(lon_scale, T::zero());
    frame.d_max = frame.diagonal(&bbox);
    Ok(DatasetSummary {
        count: objects.len(),
        bbox,
        frame,
        degenerate_extent: frame.d_max == T::zero(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(id: u64, lon: f64, lat: f64) -> GeoObject<f64> {
        GeoObject::new(id, Location::new(lon, lat), WordSet::from_iter([1, 2]))
    }

    #[test]
    fn three_four_five_extent() {
        let objs = vec![obj(1, 0.0, 0.0), obj(2, 3.0, 4.0), obj(3, 0.0, 4.0)];
        let s = validate_dataset(&objs).unwrap();
        assert_eq!(s.count, 3);
        // Longitude is scaled by cos(mean lat = 8/3 deg), which shortens the
        // 3-degree side by about 0.1%.
        assert!((s.d_max() - 5.0).abs() < 5e-3, "{}", s.d_max());
        let flat = Frame::new(1.0, 0.0);
        assert_eq!(flat.diagonal(&s.bbox), 5.0);
    }

    #[test]
    fn single_object_is_degenerate() {
        let s = validate_dataset(&[obj(1, 10.0, 20.0)]).unwrap();
        assert_eq!(s.d_max(), 0.0);
        assert!(s.degenerate_extent);
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = validate_dataset(&[obj(7, 0.0, 0.0), obj(7, 1.0, 1.0)]).unwrap_err();
        assert_eq!(err.to_string(), "duplicate id 7");
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(validate_dataset(&[obj(1, 181.0, 0.0)]).is_err());
        assert!(validate_dataset(&[obj(1, 0.0, -90.5)]).is_err());
    }

    #[test]
    fn wordset_rejects_unsorted_and_duplicates() {
        assert!(WordSet::from_sorted(vec![1, 3, 2]).is_err());
        assert!(WordSet::from_sorted(vec![1, 1]).is_err());
        assert_eq!(WordSet::from_iter([3, 1, 3]).as_slice(), &[1, 3]);
    }

    #[test]
    fn query_validation() {
        let q = Query::<f64>::new(Location::new(0.0, 0.0), WordSet::from_iter([1]));
        assert!(q.validate().is_ok());
        assert!(q.clone().with_theta(1).validate().is_err());
        assert!(q.clone().with_k(0).validate().is_err());
        assert!(q.clone().with_lambda(1.5).validate().is_err());
        let empty = Query::<f64>::new(Location::new(0.0, 0.0), WordSet::default());
        assert!(empty.validate().is_err());
    }
}
