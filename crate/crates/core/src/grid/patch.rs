use super::{cell_area, cell_size_meters, IndexBox, PhysConfig};

/// Ghost frame width on every side of a patch.
pub const NGHOST: usize = 2;

/// Time-integrated face fluxes accumulated by a fine patch on its boundary,
/// `sum(dt * face_length * F)` per fine face. Each side stores the flux as
/// seen from the cell outside the patch.
#[derive(Clone, Debug, Default)]
pub struct BoundaryRegister {
    pub west: Vec<[f64; 3]>,
    pub east: Vec<[f64; 3]>,
    pub south: Vec<[f64; 3]>,
    pub north: Vec<[f64; 3]>,
}

impl BoundaryRegister {
    fn new(nx: usize, ny: usize) -> Self {
        Self {
            west: vec![[0.0; 3]; ny],
            east: vec![[0.0; 3]; ny],
            south: vec![[0.0; 3]; nx],
            north: vec![[0.0; 3]; nx],
        }
    }

    pub fn clear(&mut self) {
        for side in [&mut self.west, &mut self.east, &mut self.south, &mut self.north] {
            side.iter_mut().for_each(|v| *v = [0.0; 3]);
        }
    }
}

/// Length-weighted numerical fluxes of the most recent step on every face of
/// the patch interior. `*_lo` is the flux seen by the cell on the low side
/// (west/south) of the face, `*_hi` by the cell on the high side. They differ
/// only by the bathymetry source carried in the momentum f-waves.
#[derive(Clone, Debug, Default)]
pub struct FaceFluxes {
    /// x faces, `(nx + 1) * ny`, index `j * (nx + 1) + i`.
    pub x_lo: Vec<[f64; 3]>,
    pub x_hi: Vec<[f64; 3]>,
    /// y faces, `nx * (ny + 1)`, index `j * nx + i`.
    pub y_lo: Vec<[f64; 3]>,
    pub y_hi: Vec<[f64; 3]>,
}

impl FaceFluxes {
    fn new(nx: usize, ny: usize) -> Self {
        Self {
            x_lo: vec![[0.0; 3]; (nx + 1) * ny],
            x_hi: vec![[0.0; 3]; (nx + 1) * ny],
            y_lo: vec![[0.0; 3]; nx * (ny + 1)],
            y_hi: vec![[0.0; 3]; nx * (ny + 1)],
        }
    }
}

/// One logically rectangular grid on one refinement level.
///
/// Cell arrays include the ghost frame. Local indices run from `-NGHOST` to
/// `n + NGHOST - 1`; local `(0, 0)` is global cell `(rect.ilo, rect.jlo)`.
#[derive(Clone, Debug)]
pub struct Patch {
    pub level: usize,
    pub rect: IndexBox,
    pub dlon: f64,
    pub dlat: f64,
    /// South-west corner of the domain (global index origin).
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub earth_radius: f64,
    pub h: Vec<f64>,
    pub hu: Vec<f64>,
    pub hv: Vec<f64>,
    pub b: Vec<f64>,
    pub manning: Vec<f64>,
    /// State at the start of the last step, kept for time interpolation.
    pub old_h: Vec<f64>,
    pub old_hu: Vec<f64>,
    pub old_hv: Vec<f64>,
    pub fluxes: FaceFluxes,
    pub register: BoundaryRegister,
}

impl Patch {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        level: usize,
        rect: IndexBox,
        dlon: f64,
        dlat: f64,
        origin_lon: f64,
        origin_lat: f64,
        earth_radius: f64,
    ) -> Self {
        assert!(!rect.is_empty(), "patch rectangle must be non-empty");
        let nx = rect.nx as usize;
        let ny = rect.ny as usize;
        let n = (nx + 2 * NGHOST) * (ny + 2 * NGHOST);
        Self {
            level,
            rect,
            dlon,
            dlat,
            origin_lon,
            origin_lat,
            earth_radius,
            h: vec![0.0; n],
            hu: vec![0.0; n],
            hv: vec![0.0; n],
            b: vec![0.0; n],
            manning: vec![0.0; n],
            old_h: vec![0.0; n],
            old_hu: vec![0.0; n],
            old_hv: vec![0.0; n],
            fluxes: FaceFluxes::new(nx, ny),
            register: BoundaryRegister::new(nx, ny),
        }
    }

    pub fn nx(&self) -> usize {
        self.rect.nx as usize
    }

    pub fn ny(&self) -> usize {
        self.rect.ny as usize
    }

    /// Row stride of the ghost-inclusive arrays.
    pub fn stride(&self) -> usize {
        self.nx() + 2 * NGHOST
    }

    /// Flat index of local cell `(i, j)`, ghosts included.
    #[inline]
    pub fn idx(&self, i: isize, j: isize) -> usize {
        let g = NGHOST as isize;
        debug_assert!(i >= -g && i < self.rect.nx as isize + g);
        debug_assert!(j >= -g && j < self.rect.ny as isize + g);
        ((j + g) as usize) * self.stride() + (i + g) as usize
    }

    /// Local indices of a global cell.
    pub fn local(&self, gi: i64, gj: i64) -> (isize, isize) {
        ((gi - self.rect.ilo) as isize, (gj - self.rect.jlo) as isize)
    }

    pub fn in_frame(&self, i: isize, j: isize) -> bool {
        let g = NGHOST as isize;
        i >= -g && i < self.rect.nx as isize + g && j >= -g && j < self.rect.ny as isize + g
    }

    pub fn is_interior(&self, i: isize, j: isize) -> bool {
        i >= 0 && i < self.rect.nx as isize && j >= 0 && j < self.rect.ny as isize
    }

    pub fn lon_center(&self, i: isize) -> f64 {
        self.origin_lon + ((self.rect.ilo + i as i64) as f64 + 0.5) * self.dlon
    }

    pub fn lat_center(&self, j: isize) -> f64 {
        self.origin_lat + ((self.rect.jlo + j as i64) as f64 + 0.5) * self.dlat
    }

    /// Latitude of the south face of local row `j`.
    pub fn lat_face(&self, j: isize) -> f64 {
        self.origin_lat + (self.rect.jlo + j as i64) as f64 * self.dlat
    }

    pub fn cell_area(&self, j: isize) -> f64 {
        cell_area(self.lat_face(j), self.lat_face(j + 1), self.dlon, self.earth_radius)
    }

    /// Metric cell size at the row latitude.
    pub fn cell_size(&self, j: isize) -> (f64, f64) {
        cell_size_meters(self.lat_center(j), self.dlon, self.dlat, self.earth_radius)
    }

    /// Length of an x face (constant along a meridian).
    pub fn x_face_length(&self) -> f64 {
        self.earth_radius * self.dlat.to_radians()
    }

    /// Length of the y face on the south side of local row `j`.
    pub fn y_face_length(&self, j: isize) -> f64 {
        self.earth_radius * self.lat_face(j).to_radians().cos() * self.dlon.to_radians()
    }

    /// Total water volume over interior cells.
    pub fn mass(&self) -> f64 {
        let mut total = 0.0;
        for j in 0..self.ny() as isize {
            let area = self.cell_area(j);
            let mut row = 0.0;
            for i in 0..self.nx() as isize {
                row += self.h[self.idx(i, j)];
            }
            total += row * area;
        }
        total
    }

    pub fn save_old(&mut self) {
        self.old_h.copy_from_slice(&self.h);
        self.old_hu.copy_from_slice(&self.hu);
        self.old_hv.copy_from_slice(&self.hv);
    }

    pub fn restore_old(&mut self) {
        self.h.copy_from_slice(&self.old_h);
        self.hu.copy_from_slice(&self.old_hu);
        self.hv.copy_from_slice(&self.old_hv);
    }

    /// Zero momentum in dry cells and clip round-off negative depths.
    pub fn enforce_dry(&mut self, dry_tolerance: f64) {
        for k in 0..self.h.len() {
            if self.h[k] < dry_tolerance {
                if self.h[k] < 0.0 {
                    self.h[k] = 0.0;
                }
                self.hu[k] = 0.0;
                self.hv[k] = 0.0;
            }
        }
    }
}

/// Sea surface of a cell; dry cells report `sea_level` so dry land is not a
/// perturbation.
pub fn surface_elevation(patch: &Patch, i: isize, j: isize, phys: &PhysConfig) -> f64 {
    let k = patch.idx(i, j);
    if patch.h[k] < phys.dry_tolerance {
        phys.sea_level
    } else {
        patch.h[k] + patch.b[k]
    }
}

/// `h = max(0, sea_level - b)` and zero momentum everywhere, ghosts included.
pub fn initialize_lake_at_rest(patch: &mut Patch, sea_level: f64) {
    for k in 0..patch.h.len() {
        patch.h[k] = (sea_level - patch.b[k]).max(0.0);
        patch.hu[k] = 0.0;
        patch.hv[k] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch() -> Patch {
        Patch::new(1, IndexBox::new(0, 0, 3, 2), 0.25, 0.25, -90.0, 28.0, 6.367e6)
    }

    #[test]
    fn lake_at_rest_depths() {
        let mut p = patch();
        let (k0, k1, k2) = (p.idx(0, 0), p.idx(1, 0), p.idx(2, 0));
        p.b[k0] = -10.0;
        p.b[k1] = 2.0;
        p.b[k2] = -0.1;
        initialize_lake_at_rest(&mut p, 0.0);
        assert_eq!(p.h[p.idx(0, 0)], 10.0);
        assert_eq!(p.h[p.idx(1, 0)], 0.0);
        initialize_lake_at_rest(&mut p, 0.28);
        assert!((p.h[p.idx(2, 0)] - 0.38).abs() < 1e-15);
    }

    #[test]
    fn surface_elevation_conventions() {
        let phys = PhysConfig::default();
        let mut p = patch();
        let k = p.idx(0, 0);
        p.h[k] = 10.0;
        p.b[k] = -10.0;
        assert_eq!(surface_elevation(&p, 0, 0, &phys), 0.0);
        let k = p.idx(1, 0);
        p.h[k] = 0.0;
        p.b[k] = 5.0;
        assert_eq!(surface_elevation(&p, 1, 0, &phys), 0.0);
        let phys = PhysConfig { sea_level: 0.28, ..PhysConfig::default() };
        let k = p.idx(2, 1);
        p.h[k] = 10.28;
        p.b[k] = -10.0;
        assert!((surface_elevation(&p, 2, 1, &phys) - 0.28).abs() < 1e-14);
    }

    #[test]
    fn indexing_covers_frame() {
        let p = patch();
        assert_eq!(p.idx(-2, -2), 0);
        assert_eq!(p.idx(4, 3), p.h.len() - 1);
        assert_eq!(p.local(1, 1), (1, 1));
    }
}
