//! Foreground pixel domains: indexing, connected components and
//! nearest-pixel neighborhoods.
//!
//! Foreground pixels are numbered in row-major order. Every neighborhood
//! query is confined to the connected component (8-adjacency) of the query
//! pixel, so operators assembled from these neighborhoods never couple two
//! components.

use crate::camera::Projection;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Pixel coordinate: `u` is the column, `v` the row (growing downwards).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    pub u: usize,
    pub v: usize,
}

impl Pixel {
    pub const fn new(u: usize, v: usize) -> Self {
        Self { u, v }
    }

    pub fn offset_from(self, origin: Pixel) -> Offset {
        Offset {
            du: self.u as i64 - origin.u as i64,
            dv: self.v as i64 - origin.v as i64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Offset {
    pub du: i64,
    pub dv: i64,
}

impl Offset {
    pub const fn new(du: i64, dv: i64) -> Self {
        Self { du, dv }
    }
}

/// Boolean image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask data has {} entries for a {width}x{height} grid",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        u < self.width && v < self.height && self.data[v * self.width + u]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// A set of foreground pixels around a center pixel. The center is always
/// the first member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    pub center: Pixel,
    pub members: Vec<Pixel>,
}

impl Neighborhood {
    /// Builds a neighborhood from explicit offsets around the origin. Used for
    /// kernel construction where only relative positions matter.
    pub fn from_offsets(offsets: &[Offset]) -> Self {
        // Shift so that all coordinates are non-negative.
        let min_du = offsets.iter().map(|o| o.du).min().unwrap_or(0).min(0);
        let min_dv = offsets.iter().map(|o| o.dv).min().unwrap_or(0).min(0);
        let center = Pixel::new((-min_du) as usize, (-min_dv) as usize);
        let members = offsets
            .iter()
            .map(|o| Pixel::new((o.du - min_du) as usize, (o.dv - min_dv) as usize))
            .collect();
        Self { center, members }
    }

    /// Centered `d×d` block, row-major.
    pub fn square(d: usize) -> Self {
        let r = (d / 2) as i64;
        let offsets: Vec<Offset> = (-r..=r)
            .flat_map(|dv| (-r..=r).map(move |du| Offset::new(du, dv)))
            .collect();
        Self::from_offsets(&offsets)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn offsets(&self) -> Vec<Offset> {
        self.members
            .iter()
            .map(|m| m.offset_from(self.center))
            .collect()
    }
}

/// The foreground domain with its linear indexing and component labels.
#[derive(Clone, Debug)]
pub struct PixelDomain {
    width: usize,
    height: usize,
    index_grid: Vec<usize>,
    pixels: Vec<Pixel>,
    component_of: Vec<usize>,
    component_sizes: Vec<usize>,
}

/// Row-major linear indexing over the true pixels of `mask`, with 8-connected
/// component labels numbered in order of first appearance.
pub fn build_domain(mask: &Mask) -> Result<PixelDomain> {
    let (width, height) = (mask.width, mask.height);
    let mut index_grid = vec![NONE; width * height];
    let mut pixels = Vec::new();
    for v in 0..height {
        for u in 0..width {
            if mask.data[v * width + u] {
                index_grid[v * width + u] = pixels.len();
                pixels.push(Pixel::new(u, v));
            }
        }
    }
    if pixels.is_empty() {
        return Err(Error::EmptyDomain);
    }

    let mut component_of = vec![NONE; pixels.len()];
    let mut component_sizes = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..pixels.len() {
        if component_of[seed] != NONE {
            continue;
        }
        let label = component_sizes.len();
        let mut size = 0;
        component_of[seed] = label;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            size += 1;
            let p = pixels[i];
            for dv in -1i64..=1 {
                for du in -1i64..=1 {
                    let (nu, nv) = (p.u as i64 + du, p.v as i64 + dv);
                    if nu < 0 || nv < 0 || nu >= width as i64 || nv >= height as i64 {
                        continue;
                    }
                    let j = index_grid[nv as usize * width + nu as usize];
                    if j != NONE && component_of[j] == NONE {
                        component_of[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        component_sizes.push(size);
    }

    Ok(PixelDomain {
        width,
        height,
        index_grid,
        pixels,
        component_of,
        component_sizes,
    })
}

impl PixelDomain {
    pub fn new(mask: &Mask) -> Result<Self> {
        build_domain(mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of foreground pixels.
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    /// Always false; a domain holds at least one pixel.
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    pub fn pixel_of(&self, index: usize) -> Pixel {
        self.pixels[index]
    }

    pub fn index_of(&self, p: Pixel) -> Option<usize> {
        if p.u >= self.width || p.v >= self.height {
            return None;
        }
        let i = self.index_grid[p.v * self.width + p.u];
        (i != NONE).then_some(i)
    }

    /// Index lookup with signed coordinates; `None` outside the image or the mask.
    pub fn index_at(&self, u: i64, v: i64) -> Option<usize> {
        if u < 0 || v < 0 {
            return None;
        }
        self.index_of(Pixel::new(u as usize, v as usize))
    }

    pub fn contains(&self, p: Pixel) -> bool {
        self.index_of(p).is_some()
    }

    pub fn mask(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.index_grid.iter().map(|&i| i != NONE).collect(),
        }
    }

    pub fn component_of(&self, index: usize) -> usize {
        self.component_of[index]
    }

    pub fn component_labels(&self) -> &[usize] {
        &self.component_of
    }

    pub fn num_components(&self) -> usize {
        self.component_sizes.len()
    }

    pub fn component_size(&self, label: usize) -> usize {
        self.component_sizes[label]
    }

    /// The pixel of component `label` nearest to the component centroid, ties
    /// broken by `(v, u)`.
    pub fn component_anchor(&self, label: usize) -> usize {
        let (mut su, mut sv, mut count) = (0.0, 0.0, 0.0);
        for (i, p) in self.pixels.iter().enumerate() {
            if self.component_of[i] == label {
                su += p.u as f64;
                sv += p.v as f64;
                count += 1.0;
            }
        }
        let (cu, cv) = (su / count, sv / count);
        let mut best = NONE;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.pixels.iter().enumerate() {
            if self.component_of[i] != label {
                continue;
            }
            let d = (p.u as f64 - cu).powi(2) + (p.v as f64 - cv).powi(2);
            // Row-major iteration order already realizes the (v, u) tie-break.
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn require(&self, p: Pixel) -> Result<usize> {
        self.index_of(p).ok_or(Error::NotInDomain(p))
    }

    /// True iff the `d×d` block centered at `p` lies inside the image and in
    /// the foreground.
    pub fn has_square_neighborhood(&self, p: Pixel, d: usize) -> bool {
        let r = (d / 2) as i64;
        let (u0, v0) = (p.u as i64, p.v as i64);
        (-r..=r).all(|dv| (-r..=r).all(|du| self.index_at(u0 + du, v0 + dv).is_some()))
    }

    /// [`has_square_neighborhood`](Self::has_square_neighborhood) for every
    /// foreground pixel, computed with a summed-area table of the mask.
    pub fn square_support(&self, d: usize) -> Vec<bool> {
        let (w, h) = (self.width, self.height);
        let mut sat = vec![0u32; (w + 1) * (h + 1)];
        for v in 0..h {
            let mut row = 0u32;
            for u in 0..w {
                row += u32::from(self.index_grid[v * w + u] != NONE);
                sat[(v + 1) * (w + 1) + u + 1] = sat[v * (w + 1) + u + 1] + row;
            }
        }
        let r = d / 2;
        let full = (d * d) as u32;
        self.pixels
            .iter()
            .map(|p| {
                if p.u < r || p.v < r || p.u + r >= w || p.v + r >= h {
                    return false;
                }
                let (u0, v0, u1, v1) = (p.u - r, p.v - r, p.u + r + 1, p.v + r + 1);
                let sum = sat[v1 * (w + 1) + u1] + sat[v0 * (w + 1) + u0]
                    - sat[v0 * (w + 1) + u1]
                    - sat[v1 * (w + 1) + u0];
                sum == full
            })
            .collect()
    }

    /// The `k` pixels of `p`'s component closest to `p` in the image plane,
    /// ordered by distance then `(v, u)`.
    ///
    /// The grid itself serves as the spatial index: square rings of growing
    /// radius are scanned until the disc of that radius holds `k` pixels.
    pub fn knn_pixels(&self, p: Pixel, k: usize) -> Result<Neighborhood> {
        let center = self.require(p)?;
        let label = self.component_of[center];
        let available = self.component_sizes[label];
        if k > available {
            return Err(Error::NeighborhoodExceedsDomain {
                requested: k,
                available,
            });
        }

        let (u0, v0) = (p.u as i64, p.v as i64);
        let mut candidates: Vec<(i64, Pixel)> = vec![(0, p)];
        let max_r = self.width.max(self.height) as i64;
        let mut r = 0i64;
        loop {
            let within = candidates.iter().filter(|(d2, _)| *d2 <= r * r).count();
            if within >= k || r > max_r {
                break;
            }
            r += 1;
            for dv in -r..=r {
                let step = if dv.abs() == r { 1 } else { 2 * r };
                let mut du = -r;
                while du <= r {
                    if let Some(j) = self.index_at(u0 + du, v0 + dv) {
                        if self.component_of[j] == label {
                            candidates.push((du * du + dv * dv, self.pixels[j]));
                        }
                    }
                    du += step;
                }
            }
        }
        candidates.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.v.cmp(&b.1.v)).then(a.1.u.cmp(&b.1.u)));
        candidates.truncate(k);
        Ok(Neighborhood {
            center: p,
            members: candidates.into_iter().map(|(_, q)| q).collect(),
        })
    }

    /// Pixels of `p`'s component inside the `window×window` box around `p`,
    /// sorted by 3D distance of their unprojected points to `p`'s point, then
    /// by `(v, u)`.
    pub fn window_candidates_3d(
        &self,
        depth: &[f64],
        projection: &Projection,
        p: Pixel,
        window: usize,
    ) -> Result<Vec<Pixel>> {
        if depth.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "depth has {} entries for {} foreground pixels",
                depth.len(),
                self.len()
            )));
        }
        let center = self.require(p)?;
        let label = self.component_of[center];
        let point = |i: usize| {
            let q = self.pixels[i];
            projection.unproject(q.u as f64, q.v as f64, depth[i])
        };
        let c = point(center);
        let r = (window / 2) as i64;
        let (u0, v0) = (p.u as i64, p.v as i64);
        let mut candidates = Vec::new();
        for dv in -r..=r {
            for du in -r..=r {
                if let Some(j) = self.index_at(u0 + du, v0 + dv) {
                    if self.component_of[j] == label {
                        let q = point(j);
                        let d2 = (q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2) + (q[2] - c[2]).powi(2);
                        candidates.push((d2, self.pixels[j]));
                    }
                }
            }
        }
        candidates.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.v.cmp(&b.1.v))
                .then(a.1.u.cmp(&b.1.u))
        });
        // Distance zero belongs to the center; keep it first even if a
        // duplicate 3D point exists.
        if let Some(pos) = candidates.iter().position(|(_, q)| *q == p) {
            let c = candidates.remove(pos);
            candidates.insert(0, c);
        }
        Ok(candidates.into_iter().map(|(_, q)| q).collect())
    }

    /// The `k` nearest pixels to `p` in 3D among the candidates of a square
    /// window, using `projection` to unproject each pixel with its depth.
    pub fn knn_points3d(
        &self,
        depth: &[f64],
        projection: &Projection,
        p: Pixel,
        k: usize,
        window: usize,
    ) -> Result<Neighborhood> {
        let mut members = self.window_candidates_3d(depth, projection, p, window)?;
        if members.len() < k {
            return Err(Error::WindowTooSmall {
                window,
                requested: k,
                available: members.len(),
            });
        }
        members.truncate(k);
        Ok(Neighborhood { center: p, members })
    }
}
