//! Track geometry: paths, transition polygons and radio coverage.
//!
//! All coordinates are meters in the local NED frame (x north, y east).
//! Lateral offsets are positive to the *left* of the direction of travel.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::{PlantError, VehicleState};
use crate::localization::GeoPoint;

pub type Point = [f64; 2];

/// A closed loop of equally spaced waypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    name: String,
    points: Vec<Point>,
    cumulative: Vec<f64>,
    length: f64,
}

/// Result of projecting a point onto a [`Path`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arclength of the foot point.
    pub s: f64,
    /// Signed distance from the path, positive to the left.
    pub lateral: f64,
    /// Index of the segment start waypoint.
    pub index: usize,
}

impl Path {
    pub fn new(name: impl Into<String>, points: Vec<Point>) -> Result<Self, PlantError> {
        let name = name.into();
        if points.len() < 3 {
            return Err(PlantError::BadTrack(format!(
                "path {name} needs at least 3 waypoints"
            )));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for i in 0..points.len() {
            cumulative.push(acc);
            acc += dist(points[i], points[(i + 1) % points.len()]);
        }
        Ok(Path {
            name,
            points,
            cumulative,
            length: acc,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn mean_spacing(&self) -> f64 {
        self.length / self.points.len() as f64
    }

    /// Checks that consecutive waypoints are equally spaced within `tol`
    /// (relative).
    pub fn check_spacing(&self, tol: f64) -> Result<(), PlantError> {
        let mean = self.mean_spacing();
        for i in 0..self.points.len() {
            let d = dist(self.points[i], self.points[(i + 1) % self.points.len()]);
            if ((d - mean) / mean).abs() > tol {
                return Err(PlantError::BadTrack(format!(
                    "path {} spacing {d:.4} m at waypoint {i} deviates from mean {mean:.4} m",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Index of the waypoint nearest to `p`.
    pub fn closest_index(&self, p: Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, w) in self.points.iter().enumerate() {
            let d = dist2(*w, p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn project(&self, p: Point) -> Projection {
        let n = self.points.len();
        let mut best = Projection {
            s: 0.0,
            lateral: f64::INFINITY,
            index: 0,
        };
        let mut best_d = f64::INFINITY;
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            let ab = [b[0] - a[0], b[1] - a[1]];
            let seg = ab[0] * ab[0] + ab[1] * ab[1];
            let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / seg).clamp(0.0, 1.0);
            let foot = [a[0] + t * ab[0], a[1] + t * ab[1]];
            let d = dist2(foot, p);
            if d < best_d {
                best_d = d;
                let len = seg.sqrt();
                // left normal of a segment heading (cos h, sin h) is (sin h, -cos h)
                let left = [ab[1] / len, -ab[0] / len];
                let lateral = (p[0] - foot[0]) * left[0] + (p[1] - foot[1]) * left[1];
                best = Projection {
                    s: self.cumulative[i] + t * len,
                    lateral,
                    index: i,
                };
            }
        }
        best
    }

    fn wrap_s(&self, s: f64) -> f64 {
        s.rem_euclid(self.length)
    }

    fn segment_at(&self, s: f64) -> (usize, f64) {
        let s = self.wrap_s(s);
        let i = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (i, s - self.cumulative[i])
    }

    pub fn point_at(&self, s: f64) -> Point {
        let (i, rem) = self.segment_at(s);
        let a = self.points[i];
        let b = self.points[(i + 1) % self.points.len()];
        let len = dist(a, b);
        let t = if len > 0.0 { rem / len } else { 0.0 };
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let (i, _) = self.segment_at(s);
        let a = self.points[i];
        let b = self.points[(i + 1) % self.points.len()];
        (b[1] - a[1]).atan2(b[0] - a[0])
    }

    /// Signed curvature (positive = turning right, increasing heading) near `s`.
    pub fn curvature_at(&self, s: f64) -> f64 {
        let h = self.mean_spacing() * 2.0;
        let d = super::normalize_angle(self.heading_at(s + h) - self.heading_at(s - h));
        d / (2.0 * h)
    }

    /// Ground-truth state of a vehicle riding this path at arclength `s`.
    pub fn state_at(&self, s: f64, speed: f64) -> VehicleState {
        let p = self.point_at(s);
        let mut st = VehicleState::at(p[0], p[1], self.heading_at(s), speed);
        st.yaw_rate = speed * self.curvature_at(s);
        st
    }
}

/// Resamples a closed polyline to `count` points equally spaced by arclength.
fn resample_closed(points: &[Point], count: usize) -> Vec<Point> {
    let n = points.len();
    let mut cum = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    cum.push(0.0);
    for i in 0..n {
        acc += dist(points[i], points[(i + 1) % n]);
        cum.push(acc);
    }
    let step = acc / count as f64;
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for k in 0..count {
        let s = k as f64 * step;
        while cum[seg + 1] < s {
            seg += 1;
        }
        let a = points[seg];
        let b = points[(seg + 1) % n];
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    out
}

/// Named convex region used for coarse track-section detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub name: String,
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn rect(name: &str, x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Polygon {
            name: name.to_string(),
            vertices: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
        }
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len() as f64;
        let sx: f64 = self.vertices.iter().map(|v| v[0]).sum();
        let sy: f64 = self.vertices.iter().map(|v| v[1]).sum();
        [sx / n, sy / n]
    }

    /// Even-odd containment; points on an edge count as inside.
    pub fn contains(&self, p: Point) -> bool {
        let v = &self.vertices;
        let n = v.len();
        for i in 0..n {
            if on_segment(p, v[i], v[(i + 1) % n]) {
                return true;
            }
        }
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = (v[i][0], v[i][1]);
            let (xj, yj) = (v[j][0], v[j][1]);
            if (yi > p[1]) != (yj > p[1]) && p[0] < (xj - xi) * (p[1] - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    pub fn is_simple(&self) -> bool {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                // adjacent edges share a vertex
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                    return false;
                }
            }
        }
        true
    }
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    if cross.abs() > 1e-9 * (1.0 + dist(a, b)) {
        return false;
    }
    p[0] >= a[0].min(b[0]) - 1e-12
        && p[0] <= a[0].max(b[0]) + 1e-12
        && p[1] >= a[1].min(b[1]) - 1e-12
        && p[1] <= a[1].max(b[1]) + 1e-12
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    fn orient(a: Point, b: Point, c: Point) -> f64 {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    }
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Radio link whose coverage is modeled per track arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Mylaps,
    Basestation,
}

/// An interval of centerline arclength where `link` is dead. `from > to`
/// wraps through the start line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeadArc {
    pub link: Link,
    pub from: f64,
    pub to: f64,
}

impl DeadArc {
    pub fn covers(&self, s: f64) -> bool {
        if self.from <= self.to {
            s >= self.from && s < self.to
        } else {
            s >= self.from || s < self.to
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackModel {
    pub origin: GeoPoint,
    pub centerline: Path,
    pub paths: BTreeMap<String, Path>,
    pub polygons: Vec<Polygon>,
    pub coverage: Vec<DeadArc>,
}

impl TrackModel {
    pub fn from_config(cfg: &TrackConfig) -> Result<Self, PlantError> {
        let spacing = cfg.centerline.spacing();
        let raw_center = cfg.centerline.raw_points()?;
        let center_pts = resample_closed(&raw_center, count_for(&raw_center, spacing));
        let centerline = Path::new("centerline", center_pts)?;

        let mut paths = BTreeMap::new();
        for (name, spec) in &cfg.paths {
            let raw = match spec {
                PathSpec::Points { points } => points.clone(),
                PathSpec::Offset { offset } => offset_path(&centerline, offset)?,
            };
            let pts = resample_closed(&raw, count_for(&raw, spacing));
            paths.insert(name.clone(), Path::new(name.clone(), pts)?);
        }
        let track = TrackModel {
            origin: cfg.origin,
            centerline,
            paths,
            polygons: cfg.polygons.clone(),
            coverage: cfg.coverage.clone(),
        };
        track.validate()?;
        Ok(track)
    }

    pub fn default_oval() -> Self {
        TrackModel::from_config(&TrackConfig::default_oval()).expect("built-in track is valid")
    }

    pub fn load(path: &FsPath) -> Result<Self, PlantError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PlantError::BadTrack(format!("{}: {e}", path.display())))?;
        let cfg: TrackConfig = toml::from_str(&text)
            .map_err(|e| PlantError::BadTrack(format!("{}: {e}", path.display())))?;
        TrackModel::from_config(&cfg)
    }

    fn validate(&self) -> Result<(), PlantError> {
        self.centerline.check_spacing(0.01)?;
        for p in self.paths.values() {
            p.check_spacing(0.01)?;
        }
        for poly in &self.polygons {
            if !poly.is_simple() {
                return Err(PlantError::BadTrack(format!(
                    "polygon {} is self-intersecting",
                    poly.name
                )));
            }
        }
        let len = self.length();
        for arc in &self.coverage {
            for v in [arc.from, arc.to] {
                if !(0.0..len).contains(&v) {
                    return Err(PlantError::BadTrack(format!(
                        "coverage arc bound {v} outside [0, {len})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.centerline.length()
    }

    pub fn path(&self, name: &str) -> Option<&Path> {
        self.paths.get(name)
    }

    /// Centerline arclength of a position.
    pub fn arclength(&self, p: Point) -> f64 {
        self.centerline.project(p).s
    }

    pub fn link_dead(&self, link: Link, s: f64) -> bool {
        self.coverage.iter().any(|a| a.link == link && a.covers(s))
    }

    /// Name of the polygon containing `p`, if any.
    pub fn in_region(&self, p: Point) -> Result<Option<&str>, PlantError> {
        let mut hit: Option<&str> = None;
        for poly in &self.polygons {
            if poly.contains(p) {
                if let Some(first) = hit {
                    return Err(PlantError::AmbiguousRegion {
                        first: first.to_string(),
                        second: poly.name.clone(),
                    });
                }
                hit = Some(&poly.name);
            }
        }
        Ok(hit)
    }

    /// Signed along-track distance from `ego` to `opp`, positive when the
    /// opponent is ahead.
    pub fn true_separation(&self, ego: &VehicleState, opp: &VehicleState) -> f64 {
        let len = self.length();
        let se = self.arclength([ego.x, ego.y]);
        let so = self.arclength([opp.x, opp.y]);
        let mut d = (so - se).rem_euclid(len);
        if d > len / 2.0 {
            d -= len;
        }
        d
    }
}

fn count_for(points: &[Point], spacing: f64) -> usize {
    let n = points.len();
    let len: f64 = (0..n).map(|i| dist(points[i], points[(i + 1) % n])).sum();
    ((len / spacing).round() as usize).max(3)
}

fn offset_path(center: &Path, profile: &[[f64; 2]]) -> Result<Vec<Point>, PlantError> {
    if profile.is_empty() {
        return Err(PlantError::BadTrack("empty offset profile".into()));
    }
    let n = center.len();
    let out = (0..n)
        .map(|i| {
            let s = center.cumulative[i];
            let h = center.heading_at(s + 0.5 * center.mean_spacing());
            let off = interp_profile(profile, s);
            let p = center.points[i];
            [p[0] + off * h.sin(), p[1] - off * h.cos()]
        })
        .collect();
    Ok(out)
}

fn interp_profile(profile: &[[f64; 2]], s: f64) -> f64 {
    if s <= profile[0][0] {
        return profile[0][1];
    }
    for w in profile.windows(2) {
        let ([s0, o0], [s1, o1]) = (w[0], w[1]);
        if s <= s1 {
            let t = if s1 > s0 { (s - s0) / (s1 - s0) } else { 1.0 };
            return o0 + t * (o1 - o0);
        }
    }
    profile[profile.len() - 1][1]
}

fn dist(a: Point, b: Point) -> f64 {
    dist2(a, b).sqrt()
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// On-disk description of a track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackConfig {
    pub origin: GeoPoint,
    pub centerline: CenterlineSpec,
    pub paths: BTreeMap<String, PathSpec>,
    #[serde(default)]
    pub polygons: Vec<Polygon>,
    #[serde(default)]
    pub coverage: Vec<DeadArc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CenterlineSpec {
    /// Two straights joined by semicircles, driven clockwise.
    Oval {
        length: f64,
        radius: f64,
        spacing: f64,
    },
    /// Closed loop driven clockwise whose curvature varies as
    /// `(2π / length) · (1 − bend · cos(4π s / length))`: two gentle
    /// near-straights joined by tighter bends, with no curvature steps.
    /// `bend` in `[0, 1)`; 0 is a circle.
    SmoothOval {
        length: f64,
        bend: f64,
        spacing: f64,
    },
    Points {
        points: Vec<Point>,
        spacing: f64,
    },
}

impl CenterlineSpec {
    fn spacing(&self) -> f64 {
        match self {
            CenterlineSpec::Oval { spacing, .. }
            | CenterlineSpec::SmoothOval { spacing, .. }
            | CenterlineSpec::Points { spacing, .. } => *spacing,
        }
    }

    fn raw_points(&self) -> Result<Vec<Point>, PlantError> {
        match self {
            CenterlineSpec::Points { points, .. } => Ok(points.clone()),
            CenterlineSpec::Oval {
                length,
                radius,
                spacing,
            } => {
                let straight = (length - 2.0 * PI * radius) / 2.0;
                if straight <= 0.0 || *spacing <= 0.0 {
                    return Err(PlantError::BadTrack(format!(
                        "oval of length {length} cannot have radius {radius}"
                    )));
                }
                Ok(oval_points(straight, *radius, *spacing / 4.0))
            }
            CenterlineSpec::SmoothOval {
                length,
                bend,
                spacing,
            } => {
                if !(0.0..1.0).contains(bend) || *length <= 0.0 || *spacing <= 0.0 {
                    return Err(PlantError::BadTrack(format!(
                        "smooth oval needs length > 0 and bend in [0, 1), got {length} and {bend}"
                    )));
                }
                Ok(smooth_oval_points(*length, *bend, *spacing / 4.0))
            }
        }
    }
}

/// Points every `step` meters of arclength, starting a quarter of a
/// near-straight before its midpoint on the north side, heading east.
/// The loop is centered on the origin.
fn smooth_oval_points(length: f64, bend: f64, step: f64) -> Vec<Point> {
    let n = (length / step).round() as usize;
    let ds = length / n as f64;
    let mean = 2.0 * PI / length;
    let w = 4.0 * PI / length;
    // closed-form heading, zero at s = length / 8 (middle of the first
    // near-straight) and decreasing: turns are to the right
    let heading = |s: f64| {
        let c = length / 8.0;
        -(mean * (s - c) - mean * bend / w * ((w * (s - c)).sin()))
    };
    let mut pts = Vec::with_capacity(n);
    let (mut x, mut y) = (0.0, 0.0);
    for i in 0..n {
        pts.push([x, y]);
        let h = heading((i as f64 + 0.5) * ds);
        x += ds * h.cos();
        y += ds * h.sin();
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &pts {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    pts.iter().map(|p| [p[0] - cx, p[1] - cy]).collect()
}

/// Dense oval polyline starting at the south end of the east straight,
/// heading north; turns are to the left.
fn oval_points(straight: f64, r: f64, step: f64) -> Vec<Point> {
    let half = straight / 2.0;
    let n_straight = (straight / step).ceil() as usize;
    let n_arc = (PI * r / step).ceil() as usize;
    let mut pts = Vec::new();
    for i in 0..n_straight {
        pts.push([-half + straight * i as f64 / n_straight as f64, r]);
    }
    for i in 0..n_arc {
        let phi = PI * i as f64 / n_arc as f64;
        pts.push([half + r * phi.sin(), r * phi.cos()]);
    }
    for i in 0..n_straight {
        pts.push([half - straight * i as f64 / n_straight as f64, -r]);
    }
    for i in 0..n_arc {
        let phi = PI * i as f64 / n_arc as f64;
        pts.push([-half - r * phi.sin(), -r * phi.cos()]);
    }
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PathSpec {
    Points { points: Vec<Point> },
    /// Piecewise-linear lateral offset from the centerline, as
    /// `[centerline arclength, offset]` breakpoints.
    Offset { offset: Vec<[f64; 2]> },
}

impl TrackConfig {
    /// A 1500 m smooth oval with an inner raceline, an outer overtaking
    /// line, a pit lane along the north near-straight, and six transition
    /// polygons.
    pub fn default_oval() -> Self {
        let length = 1500.0;
        let bend = 0.5;
        let step = 0.25;
        let center = smooth_oval_points(length, bend, step);
        // a point `off` meters right of (inside) the centerline at arclength
        // `s`, with the local heading
        let frame = |s: f64, off: f64| {
            let n = center.len();
            let i = (s / step).round() as usize % n;
            let (p, q) = (center[i], center[(i + 1) % n]);
            let h = (q[1] - p[1]).atan2(q[0] - p[0]);
            ([p[0] + off * h.sin(), p[1] - off * h.cos()], h)
        };
        let quad = |name: &str, s: f64, off: f64, half_along: f64, half_across: f64| {
            let (c, h) = frame(s, off);
            let (ux, uy) = (h.cos(), h.sin());
            let (rx, ry) = (h.sin(), -h.cos());
            let corner = |a: f64, b: f64| [c[0] + a * ux + b * rx, c[1] + a * uy + b * ry];
            Polygon {
                name: name.to_string(),
                vertices: vec![
                    corner(-half_along, -half_across),
                    corner(half_along, -half_across),
                    corner(half_along, half_across),
                    corner(-half_along, half_across),
                ],
            }
        };

        let mut paths = BTreeMap::new();
        paths.insert(
            "raceline".to_string(),
            PathSpec::Offset {
                offset: vec![[0.0, 3.0]],
            },
        );
        paths.insert(
            "overtake".to_string(),
            PathSpec::Offset {
                offset: vec![[0.0, -3.0]],
            },
        );
        paths.insert(
            "pits".to_string(),
            PathSpec::Offset {
                offset: vec![[20.0, 3.0], [70.0, 15.0], [305.0, 15.0], [355.0, 3.0]],
            },
        );

        // pit polygons sit on the pit lane, passing-zone polygons span the
        // track on the south near-straight
        let polygons = vec![
            quad("pit_entry", 95.0, 15.0, 5.0, 5.0),
            quad("pit_slowdown", 130.0, 15.0, 5.0, 5.0),
            quad("speed_up", 245.0, 15.0, 5.0, 5.0),
            quad("pit_exit", 280.0, 15.0, 5.0, 5.0),
            quad("passing_zone_start", 785.0, 0.0, 5.0, 8.0),
            quad("passing_zone_end", 1090.0, 0.0, 5.0, 8.0),
        ];

        TrackConfig {
            // roughly the Las Vegas Motor Speedway infield
            origin: GeoPoint {
                lat: 36.2719,
                lon: -115.0105,
            },
            centerline: CenterlineSpec::SmoothOval {
                length,
                bend,
                spacing: 1.0,
            },
            paths,
            polygons,
            coverage: Vec::new(),
        }
    }
}
