//! Trip requests and travel-time providers.
//!
//! Coordinates are planar kilometres unless a geographic provider is used, in
//! which case `x` is longitude and `y` latitude in degrees. The matrix provider
//! reads `x` as an integral node id and ignores `y`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TravellerId = u64;

pub const REQUEST_HEADER: [&str; 6] = ["id", "origin_x", "origin_y", "dest_x", "dest_y", "request_time_s"];

const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripRequest {
    pub id: TravellerId,
    pub origin: Point,
    pub destination: Point,
    /// Seconds since the start of the batch.
    pub request_time_s: f64,
}

impl TripRequest {
    pub fn new(id: TravellerId, origin: Point, destination: Point, request_time_s: f64) -> Result<Self> {
        let coords = [origin.x, origin.y, destination.x, destination.y, request_time_s];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain(format!("request {id}: non-finite coordinate or time")));
        }
        if origin == destination {
            return Err(Error::domain(format!("request {id}: origin equals destination")));
        }
        if request_time_s < 0.0 {
            return Err(Error::domain(format!("request {id}: negative request time")));
        }
        Ok(TripRequest { id, origin, destination, request_time_s })
    }
}

/// Source of distances and travel times between points.
#[derive(Debug, Clone, PartialEq)]
pub enum TravelTimeProvider {
    Euclidean {
        speed_kmh: f64,
    },
    Manhattan {
        speed_kmh: f64,
    },
    /// Great-circle distance; points are (longitude, latitude) in degrees.
    Haversine {
        speed_kmh: f64,
    },
    Matrix(TravelMatrix),
}

impl Default for TravelTimeProvider {
    fn default() -> Self {
        TravelTimeProvider::Euclidean { speed_kmh: 30.0 }
    }
}

impl TravelTimeProvider {
    pub fn distance_km(&self, a: Point, b: Point) -> Result<f64> {
        match self {
            TravelTimeProvider::Euclidean { .. } => Ok((a.x - b.x).hypot(a.y - b.y)),
            TravelTimeProvider::Manhattan { .. } => Ok((a.x - b.x).abs() + (a.y - b.y).abs()),
            TravelTimeProvider::Haversine { .. } => Ok(haversine_km(a, b)),
            TravelTimeProvider::Matrix(m) => Ok(m.seconds(a, b)? / 3600.0 * m.speed_kmh),
        }
    }

    pub fn travel_time_s(&self, a: Point, b: Point) -> Result<f64> {
        match self {
            TravelTimeProvider::Euclidean { speed_kmh }
            | TravelTimeProvider::Manhattan { speed_kmh }
            | TravelTimeProvider::Haversine { speed_kmh } => Ok(self.distance_km(a, b)? / speed_kmh * 3600.0),
            TravelTimeProvider::Matrix(m) => m.seconds(a, b),
        }
    }
}

fn haversine_km(a: Point, b: Point) -> f64 {
    let (lon1, lat1) = (a.x.to_radians(), a.y.to_radians());
    let (lon2, lat2) = (b.x.to_radians(), b.y.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().asin()
}

/// Precomputed node-to-node travel times in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelMatrix {
    index: HashMap<u64, usize>,
    seconds: Vec<f64>,
    /// Used to turn times into distances.
    pub speed_kmh: f64,
}

impl TravelMatrix {
    pub fn new(nodes: &[u64], seconds: Vec<f64>, speed_kmh: f64) -> Result<Self> {
        let n = nodes.len();
        if seconds.len() != n * n {
            return Err(Error::contract(format!("matrix has {} cells, expected {n}x{n}", seconds.len())));
        }
        if seconds.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::domain("matrix times must be finite and non-negative"));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, &node) in nodes.iter().enumerate() {
            if index.insert(node, i).is_some() {
                return Err(Error::domain(format!("duplicate matrix node {node}")));
            }
        }
        Ok(TravelMatrix { index, seconds, speed_kmh })
    }

    /// Reads a square CSV whose header row and first column hold node ids.
    pub fn load(path: &Path, speed_kmh: f64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let header = reader.headers()?.clone();
        let ingest = |row: usize, message: String| Error::Ingestion { path: path.to_path_buf(), row, message };
        let nodes: Vec<u64> = header
            .iter()
            .skip(1)
            .map(|h| h.trim().parse::<u64>().map_err(|_| ingest(0, format!("bad node id `{h}` in header"))))
            .collect::<Result<_>>()?;
        let mut seconds = Vec::with_capacity(nodes.len() * nodes.len());
        for (r, record) in reader.records().enumerate() {
            let row = r + 1;
            let record = record?;
            let node: u64 = record
                .get(0)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| ingest(row, "missing row node id".into()))?;
            if nodes.get(r) != Some(&node) {
                return Err(ingest(row, format!("row node {node} does not match header order")));
            }
            if record.len() != nodes.len() + 1 {
                return Err(ingest(row, format!("expected {} cells, found {}", nodes.len() + 1, record.len())));
            }
            for cell in record.iter().skip(1) {
                let v: f64 = cell.trim().parse().map_err(|_| ingest(row, format!("bad time `{cell}`")))?;
                seconds.push(v);
            }
        }
        if seconds.len() != nodes.len() * nodes.len() {
            return Err(ingest(nodes.len(), "matrix is not square".into()));
        }
        TravelMatrix::new(&nodes, seconds, speed_kmh)
    }

    fn node(&self, p: Point) -> Result<usize> {
        if p.x.fract() != 0.0 || p.x < 0.0 {
            return Err(Error::Lookup(format!("coordinate {} is not a node id", p.x)));
        }
        self.index.get(&(p.x as u64)).copied().ok_or_else(|| Error::Lookup(format!("node {} not in matrix", p.x)))
    }

    fn seconds(&self, a: Point, b: Point) -> Result<f64> {
        let (i, j) = (self.node(a)?, self.node(b)?);
        Ok(self.seconds[i * self.index.len() + j])
    }
}

/// Private-ride distance (km) and travel time (s) for a request.
pub fn private_metrics(req: &TripRequest, provider: &TravelTimeProvider) -> Result<(f64, f64)> {
    let d = provider.distance_km(req.origin, req.destination)?;
    let t = provider.travel_time_s(req.origin, req.destination)?;
    if !(d > 0.0) {
        return Err(Error::domain(format!("request {} has zero private distance", req.id)));
    }
    Ok((d, t))
}

#[derive(Debug, Serialize, Deserialize)]
struct RequestRow {
    id: TravellerId,
    origin_x: f64,
    origin_y: f64,
    dest_x: f64,
    dest_y: f64,
    request_time_s: f64,
}

/// Reads the request CSV (`id,origin_x,origin_y,dest_x,dest_y,request_time_s`).
pub fn load_requests(path: &Path) -> Result<Vec<TripRequest>> {
    let mut reader = csv::Reader::from_path(path)?;
    let ingest = |row: usize, message: String| Error::Ingestion { path: path.to_path_buf(), row, message };
    let header = reader.headers()?.clone();
    if header.iter().ne(REQUEST_HEADER.iter().copied()) {
        return Err(ingest(0, format!("header must be `{}`", REQUEST_HEADER.join(","))));
    }
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (r, record) in reader.deserialize::<RequestRow>().enumerate() {
        let row = r + 1;
        let rec = record.map_err(|e| ingest(row, e.to_string()))?;
        if let Some(first) = seen.insert(rec.id, row) {
            return Err(ingest(row, format!("duplicate id {} (first seen on row {first})", rec.id)));
        }
        let req = TripRequest::new(
            rec.id,
            Point::new(rec.origin_x, rec.origin_y),
            Point::new(rec.dest_x, rec.dest_y),
            rec.request_time_s,
        )
        .map_err(|e| ingest(row, e.to_string()))?;
        out.push(req);
    }
    Ok(out)
}

pub fn write_requests(path: &Path, requests: &[TripRequest]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for r in requests {
        writer.serialize(RequestRow {
            id: r.id,
            origin_x: r.origin.x,
            origin_y: r.origin.y,
            dest_x: r.destination.x,
            dest_y: r.destination.y,
            request_time_s: r.request_time_s,
        })?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn req(o: (f64, f64), d: (f64, f64)) -> TripRequest {
        TripRequest::new(1, Point::new(o.0, o.1), Point::new(d.0, d.1), 0.0).unwrap()
    }

    #[test]
    fn euclidean_three_four_five() {
        let (d, t) = private_metrics(&req((0.0, 0.0), (3.0, 4.0)), &TravelTimeProvider::default()).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
        assert!((t - 600.0).abs() < 1e-9);
    }

    #[test]
    fn manhattan_is_l1() {
        let p = TravelTimeProvider::Manhattan { speed_kmh: 30.0 };
        let (d, _) = private_metrics(&req((0.0, 0.0), (3.0, 4.0)), &p).unwrap();
        assert!((d - 7.0).abs() < 1e-12);
    }

    #[test]
    fn haversine_one_degree_of_latitude() {
        let p = TravelTimeProvider::Haversine { speed_kmh: 30.0 };
        let d = p.distance_km(Point::new(-73.98, 40.0), Point::new(-73.98, 41.0)).unwrap();
        assert!((d - 111.195).abs() < 0.01, "{d}");
    }

    #[test]
    fn origin_equal_destination_rejected() {
        assert!(TripRequest::new(1, Point::new(1.0, 1.0), Point::new(1.0, 1.0), 0.0).is_err());
        assert!(TripRequest::new(1, Point::new(0.0, 0.0), Point::new(1.0, 1.0), -1.0).is_err());
    }

    #[test]
    fn matrix_lookup_and_missing_entry() {
        let m = TravelMatrix::new(&[1, 2], vec![0.0, 120.0, 130.0, 0.0], 30.0).unwrap();
        let p = TravelTimeProvider::Matrix(m);
        let r = TripRequest::new(7, Point::new(1.0, 0.0), Point::new(2.0, 0.0), 0.0).unwrap();
        let (d, t) = private_metrics(&r, &p).unwrap();
        assert_eq!(t, 120.0);
        assert!((d - 1.0).abs() < 1e-12);
        let bad = TripRequest::new(8, Point::new(1.0, 0.0), Point::new(3.0, 0.0), 0.0).unwrap();
        assert!(matches!(private_metrics(&bad, &p), Err(Error::Lookup(_))));
    }

    #[test]
    fn matrix_csv_loads() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "node,10,20\n10,0,300\n20,310,0").unwrap();
        let m = TravelMatrix::load(f.path(), 30.0).unwrap();
        let p = TravelTimeProvider::Matrix(m);
        assert_eq!(p.travel_time_s(Point::new(20.0, 0.0), Point::new(10.0, 0.0)).unwrap(), 310.0);
    }

    #[test]
    fn loads_three_rows_in_order() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "id,origin_x,origin_y,dest_x,dest_y,request_time_s\n5,0,0,1,1,10\n3,1,1,2,2,0\n9,0.5,0,0,3,100")
            .unwrap();
        let reqs = load_requests(f.path()).unwrap();
        assert_eq!(reqs.iter().map(|r| r.id).collect::<Vec<_>>(), vec![5, 3, 9]);
        assert_eq!(reqs[2].destination, Point::new(0.0, 3.0));
    }

    #[test]
    fn duplicate_id_is_named() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "id,origin_x,origin_y,dest_x,dest_y,request_time_s\n4,0,0,1,1,0\n4,1,1,2,2,0").unwrap();
        let err = load_requests(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("duplicate id 4") && msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn malformed_and_non_finite_rows() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "id,origin_x,origin_y,dest_x,dest_y,request_time_s\n1,0,0,1,1,0\n2,abc,0,1,1,0").unwrap();
        let err = load_requests(f.path()).unwrap_err();
        assert!(matches!(err, Error::Ingestion { row: 2, .. }), "{err}");

        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "id,origin_x,origin_y,dest_x,dest_y,request_time_s\n1,NaN,0,1,1,0").unwrap();
        assert!(matches!(load_requests(g.path()).unwrap_err(), Error::Ingestion { row: 1, .. }));

        let mut h = tempfile::NamedTempFile::new().unwrap();
        writeln!(h, "id,ox,oy,dx,dy,t\n1,0,0,1,1,0").unwrap();
        assert!(matches!(load_requests(h.path()).unwrap_err(), Error::Ingestion { row: 0, .. }));
    }

    proptest! {
        #[test]
        fn metric_triangle_inequality(
            a in (-10.0..10.0f64, -10.0..10.0f64),
            b in (-10.0..10.0f64, -10.0..10.0f64),
            c in (-10.0..10.0f64, -10.0..10.0f64),
        ) {
            let (a, b, c) = (Point::new(a.0, a.1), Point::new(b.0, b.1), Point::new(c.0, c.1));
            for p in [
                TravelTimeProvider::Euclidean { speed_kmh: 30.0 },
                TravelTimeProvider::Manhattan { speed_kmh: 25.0 },
                TravelTimeProvider::Haversine { speed_kmh: 30.0 },
            ] {
                let ab = p.travel_time_s(a, b).unwrap();
                let bc = p.travel_time_s(b, c).unwrap();
                let ac = p.travel_time_s(a, c).unwrap();
                prop_assert!(ab >= 0.0);
                prop_assert!(ab + bc >= ac - 1e-9 * ac.max(1.0));
                prop_assert_eq!(ab, p.travel_time_s(a, b).unwrap());
            }
        }
    }
}
