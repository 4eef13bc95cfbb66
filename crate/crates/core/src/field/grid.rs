use crate::{Error, Real, Result};

pub const MIN_LEVEL: u32 = 3;
pub const MAX_LEVEL: u32 = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GridKind {
    /// `[0, 1]`
    Interval,
    /// `[0, 1]^2`
    Square,
    /// `[0, 1] x [0, T]`, axis order `(x, t)`.
    SpaceTime,
}

/// Uniform tensor grid with `2^level + 1` nodes per axis.
///
/// Values of fields on the grid are stored row-major: the last axis varies
/// fastest, so the flat index of node `(i, j)` is `i * n + j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TensorGrid<T> {
    kind: GridKind,
    level: u32,
    time_extent: T,
}

impl<T: Real> TensorGrid<T> {
    pub fn new(kind: GridKind, level: u32, time_extent: Option<T>) -> Result<Self> {
        if !(MIN_LEVEL..=MAX_LEVEL).contains(&level) {
            return Err(Error::param(format!(
                "grid level {level} outside [{MIN_LEVEL}, {MAX_LEVEL}]"
            )));
        }
        let time_extent = match (kind, time_extent) {
            (GridKind::SpaceTime, Some(t)) if t > T::zero() && t.is_finite() => t,
            (GridKind::SpaceTime, _) => {
                return Err(Error::param("space-time grid needs a positive time extent"))
            }
            (_, None) => T::one(),
            (_, Some(_)) => return Err(Error::param("time extent given for a spatial grid")),
        };
        Ok(Self { kind, level, time_extent })
    }

    pub fn interval(level: u32) -> Result<Self> {
        Self::new(GridKind::Interval, level, None)
    }

    pub fn square(level: u32) -> Result<Self> {
        Self::new(GridKind::Square, level, None)
    }

    pub fn space_time(level: u32, time_extent: T) -> Result<Self> {
        Self::new(GridKind::SpaceTime, level, Some(time_extent))
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn time_extent(&self) -> T {
        self.time_extent
    }

    /// Number of tensor axes (time counts as an axis).
    pub fn axes(&self) -> usize {
        match self.kind {
            GridKind::Interval => 1,
            GridKind::Square | GridKind::SpaceTime => 2,
        }
    }

    /// Number of spatial dimensions `D`.
    pub fn spatial_dim(&self) -> usize {
        match self.kind {
            GridKind::Interval | GridKind::SpaceTime => 1,
            GridKind::Square => 2,
        }
    }

    pub fn nodes_per_axis(&self) -> usize {
        (1usize << self.level) + 1
    }

    pub fn len(&self) -> usize {
        self.nodes_per_axis().pow(self.axes() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn extent(&self, axis: usize) -> T {
        if self.kind == GridKind::SpaceTime && axis == 1 {
            self.time_extent
        } else {
            T::one()
        }
    }

    pub fn spacing(&self, axis: usize) -> T {
        self.extent(axis) / T::from_usize_lossy(1usize << self.level)
    }

    pub fn coord(&self, axis: usize, i: usize) -> T {
        T::from_usize_lossy(i) * self.spacing(axis)
    }

    /// Stride of `axis` in the flat row-major layout.
    pub fn stride(&self, axis: usize) -> usize {
        if self.axes() == 2 && axis == 0 {
            self.nodes_per_axis()
        } else {
            1
        }
    }

    pub fn flat(&self, idx: [usize; 2]) -> usize {
        match self.axes() {
            1 => idx[0],
            _ => idx[0] * self.nodes_per_axis() + idx[1],
        }
    }

    pub fn unflat(&self, n: usize) -> [usize; 2] {
        match self.axes() {
            1 => [n, 0],
            _ => {
                let m = self.nodes_per_axis();
                [n / m, n % m]
            }
        }
    }

    /// Coordinates of node `n`; unused trailing entries are zero.
    pub fn point(&self, n: usize) -> [T; 2] {
        let [i, j] = self.unflat(n);
        match self.axes() {
            1 => [self.coord(0, i), T::zero()],
            _ => [self.coord(0, i), self.coord(1, j)],
        }
    }

    pub fn points(&self) -> impl Iterator<Item = [T; 2]> + '_ {
        (0..self.len()).map(move |n| self.point(n))
    }

    /// True on the spatial boundary (`x` in {0, 1} on every spatial axis).
    pub fn is_boundary(&self, n: usize) -> bool {
        let last = self.nodes_per_axis() - 1;
        let [i, j] = self.unflat(n);
        match self.kind {
            GridKind::Interval | GridKind::SpaceTime => i == 0 || i == last,
            GridKind::Square => i == 0 || i == last || j == 0 || j == last,
        }
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| self.is_boundary(n)).collect()
    }

    /// The same domain at another level.
    pub fn with_level(&self, level: u32) -> Result<Self> {
        let t = (self.kind == GridKind::SpaceTime).then_some(self.time_extent);
        Self::new(self.kind, level, t)
    }

    /// True when every node of `self` is a node of `finer`.
    pub fn is_nested_in(&self, finer: &Self) -> bool {
        self.kind == finer.kind && self.time_extent == finer.time_extent && self.level <= finer.level
    }

    /// Trapezoid weight of node `n` (product of 1D weights).
    pub fn trapezoid_weight(&self, n: usize) -> T {
        let last = self.nodes_per_axis() - 1;
        let idx = self.unflat(n);
        let half = T::lit(0.5);
        let mut w = T::one();
        for (axis, &i) in idx.iter().enumerate().take(self.axes()) {
            let h = self.spacing(axis);
            w *= if i == 0 || i == last { h * half } else { h };
        }
        w
    }

    pub fn trapezoid_weights(&self) -> Vec<T> {
        (0..self.len()).map(|n| self.trapezoid_weight(n)).collect()
    }
}

/// Builds a grid; `time_extent` selects a space-time grid with one spatial axis.
pub fn make_grid<T: Real>(dim: usize, level: u32, time_extent: Option<T>) -> Result<TensorGrid<T>> {
    match (dim, time_extent) {
        (1, Some(t)) => TensorGrid::space_time(level, t),
        (1, None) => TensorGrid::interval(level),
        (2, None) => TensorGrid::square(level),
        _ => Err(Error::param(format!("unsupported grid dimension {dim}"))),
    }
}
