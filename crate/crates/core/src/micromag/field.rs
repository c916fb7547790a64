use std::io::Write;
use std::ops::Range;

use super::grains::GrainMap;
use super::params::{MaterialParams, WireGeometry, MU0};
use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Unit magnetization on the cell grid, row-major (`iy * nx + ix`).
#[derive(Clone, Debug, PartialEq)]
pub struct SpinField {
    pub nx: usize,
    pub ny: usize,
    pub m: Vec<Vec3>,
    /// Simulated time, ns.
    pub time: f64,
}

impl SpinField {
    pub fn uniform(nx: usize, ny: usize, dir: Vec3) -> Self {
        Self {
            nx,
            ny,
            m: vec![dir.normalized(); nx * ny],
            time: 0.0,
        }
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> Vec3 {
        self.m[iy * self.nx + ix]
    }

    pub fn mean(&self) -> Vec3 {
        let mut s = Vec3::ZERO;
        for &v in &self.m {
            s += v;
        }
        s * (1.0 / self.m.len() as f64)
    }

    /// Mean m_z over columns `cols`.
    pub fn mean_mz_in(&self, cols: Range<usize>) -> f64 {
        let mut s = 0.0;
        let mut n = 0usize;
        for iy in 0..self.ny {
            for ix in cols.clone() {
                s += self.m[iy * self.nx + ix].z;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }

    /// Row-averaged m_z per column.
    pub fn mz_profile(&self) -> Vec<f64> {
        let mut prof = vec![0.0; self.nx];
        for iy in 0..self.ny {
            for (ix, p) in prof.iter_mut().enumerate() {
                *p += self.m[iy * self.nx + ix].z;
            }
        }
        let inv = 1.0 / self.ny as f64;
        prof.iter_mut().for_each(|p| *p *= inv);
        prof
    }

    pub fn max_norm_error(&self) -> f64 {
        self.m
            .iter()
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn renormalize(&mut self) {
        for v in &mut self.m {
            *v = v.normalized();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.is_finite())
    }

    /// Plain-text dump: one `x y mx my mz` line per cell (x, y in nm).
    pub fn write_table<W: Write>(&self, geometry: &WireGeometry, mut out: W) -> Result<()> {
        writeln!(out, "# x_nm y_nm mx my mz  t_ns={}", self.time)?;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let v = self.at(ix, iy);
                writeln!(
                    out,
                    "{} {} {:.9} {:.9} {:.9}",
                    geometry.x_center(ix),
                    (iy as f64 + 0.5) * geometry.cell_size,
                    v.x,
                    v.y,
                    v.z
                )?;
            }
        }
        Ok(())
    }
}

/// A discretized disordered wire: geometry, material and grain map, with
/// field prefactors cached.
#[derive(Clone, Debug)]
pub struct WireModel {
    pub geometry: WireGeometry,
    pub params: MaterialParams,
    pub grains: GrainMap,
    pub(crate) nx: usize,
    pub(crate) ny: usize,
    /// 2A/(μ0·Ms·dx²), A/m
    pub(crate) exchange_coef: f64,
    /// 2K/(μ0·Ms), A/m
    pub(crate) anisotropy_coef: f64,
    /// 2K_hard/(μ0·Ms), A/m
    pub(crate) hard_coef: f64,
    pub(crate) external: Vec3,
}

impl WireModel {
    pub fn new(geometry: WireGeometry, params: MaterialParams, grains: GrainMap) -> Result<Self> {
        geometry.validate()?;
        params.validate()?;
        let (nx, ny) = (geometry.nx(), geometry.ny());
        if grains.nx != nx || grains.ny != ny {
            return Err(Error::InvalidGeometry(format!(
                "grain map is {}x{}, geometry is {nx}x{ny}",
                grains.nx, grains.ny
            )));
        }
        let dx = geometry.dx_m();
        let mu_ms = MU0 * params.saturation_ms;
        Ok(Self {
            exchange_coef: 2.0 * params.exchange_a / (mu_ms * dx * dx),
            anisotropy_coef: 2.0 * params.anisotropy_k / mu_ms,
            hard_coef: 2.0 * params.wall_hard_axis_k / mu_ms,
            external: params.external(),
            nx,
            ny,
            geometry,
            params,
            grains,
        })
    }

    /// Clean wire without grains.
    pub fn clean(geometry: WireGeometry, params: MaterialParams) -> Result<Self> {
        let grains = GrainMap::uniform(&geometry)?;
        Self::new(geometry, params, grains)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn check_field(&self, field: &SpinField) -> Result<()> {
        if field.nx != self.nx || field.ny != self.ny {
            return Err(Error::InvalidGeometry(format!(
                "spin field is {}x{}, wire is {}x{}",
                field.nx, field.ny, self.nx, self.ny
            )));
        }
        Ok(())
    }

    /// Effective field at cell (ix, iy). Missing neighbors at the free edges
    /// are mirrored, so they contribute nothing to the Laplacian.
    #[inline]
    pub(crate) fn field_at(&self, m: &[Vec3], ix: usize, iy: usize) -> Vec3 {
        let nx = self.nx;
        let c = iy * nx + ix;
        let mc = m[c];
        let mut lap = Vec3::ZERO;
        if ix > 0 {
            lap += m[c - 1] - mc;
        }
        if ix + 1 < nx {
            lap += m[c + 1] - mc;
        }
        if iy > 0 {
            lap += m[c - nx] - mc;
        }
        if iy + 1 < self.ny {
            lap += m[c + nx] - mc;
        }
        let e = self.grains.cell_axes[c];
        let mut h = lap * self.exchange_coef + e * (self.anisotropy_coef * mc.dot(e));
        h.x -= self.hard_coef * mc.x;
        h + self.external
    }

    /// Fills `out` (window-local, `ny × cols.len()`) with H_eff for the columns in `cols`.
    pub(crate) fn field_window(&self, m: &[Vec3], cols: Range<usize>, out: &mut [Vec3]) {
        let w = cols.len();
        for iy in 0..self.ny {
            for (k, ix) in cols.clone().enumerate() {
                out[iy * w + k] = self.field_at(m, ix, iy);
            }
        }
    }

    /// Total energy in joules: exchange, anisotropy, hard-axis and Zeeman terms.
    pub fn energy(&self, field: &SpinField) -> f64 {
        self.energy_of(&field.m)
    }

    pub(crate) fn energy_of(&self, m: &[Vec3]) -> f64 {
        let p = &self.params;
        let dx = self.geometry.dx_m();
        let volume = dx * dx * self.geometry.thickness * 1e-9;
        let (nx, ny) = (self.nx, self.ny);
        let mut exchange = 0.0;
        let mut anis = 0.0;
        let mut hard = 0.0;
        let mut zeeman = 0.0;
        for iy in 0..ny {
            for ix in 0..nx {
                let c = iy * nx + ix;
                let mc = m[c];
                if ix + 1 < nx {
                    exchange += (m[c + 1] - mc).norm_sq();
                }
                if iy + 1 < ny {
                    exchange += (m[c + nx] - mc).norm_sq();
                }
                let d = mc.dot(self.grains.cell_axes[c]);
                anis -= d * d;
                hard += mc.x * mc.x;
                zeeman -= mc.dot(self.external);
            }
        }
        volume
            * (p.exchange_a / (dx * dx) * exchange
                + p.anisotropy_k * anis
                + p.wall_hard_axis_k * hard
                + MU0 * p.saturation_ms * zeeman)
    }

    /// max over cells of |m×H|/|H|.
    pub fn max_torque(&self, field: &SpinField) -> f64 {
        self.max_torque_in(&field.m, 0..self.nx)
    }

    pub(crate) fn max_torque_in(&self, m: &[Vec3], cols: Range<usize>) -> f64 {
        let mut worst = 0.0f64;
        for iy in 0..self.ny {
            for ix in cols.clone() {
                let h = self.field_at(m, ix, iy);
                let hn = h.norm();
                if hn > 0.0 {
                    worst = worst.max(m[iy * self.nx + ix].cross(h).norm() / hn);
                }
            }
        }
        worst
    }
}

/// H_eff in A/m for every cell: exchange (five-point in-plane Laplacian with
/// mirrored edges), grain-axis anisotropy, the wall hard-axis term and the
/// applied field.
pub fn effective_field(field: &SpinField, model: &WireModel) -> Result<Vec<Vec3>> {
    model.check_field(field)?;
    let mut out = vec![Vec3::ZERO; field.m.len()];
    model.field_window(&field.m, 0..model.nx, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::micromag::grains::generate_voronoi_grains;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_geometry() -> WireGeometry {
        WireGeometry::new(160.0, 40.0, 6.0, 4.0).unwrap()
    }

    #[test]
    fn uniform_state_along_axis() {
        let g = small_geometry();
        let model = WireModel::clean(g.clone(), MaterialParams::default()).unwrap();
        let f = SpinField::uniform(g.nx(), g.ny(), Vec3::Z);
        let h = effective_field(&f, &model).unwrap();
        let expected = 2.0 * 8.0e5 / (MU0 * 8.0e5);
        for v in h {
            assert!(v.x.abs() < 1e-9 && v.y.abs() < 1e-9);
            assert!((v.z - expected).abs() < 1e-6 * expected);
        }
    }

    #[test]
    fn perpendicular_magnetization_has_no_anisotropy_field() {
        let g = small_geometry();
        let params = MaterialParams {
            wall_hard_axis_k: 0.0,
            ..MaterialParams::default()
        };
        let model = WireModel::clean(g.clone(), params).unwrap();
        let f = SpinField::uniform(g.nx(), g.ny(), Vec3::new(0.0, 1.0, 0.0));
        for v in effective_field(&f, &model).unwrap() {
            assert!(v.norm() < 1e-9);
        }
    }

    #[test]
    fn field_is_negative_energy_gradient() {
        // Finite-difference oracle: dE/dε along δm equals -μ0·Ms·V·Σ H·δm.
        let g = small_geometry();
        let grains = generate_voronoi_grains(&g, 10.0, 8.0, 2).unwrap();
        let params = MaterialParams {
            external_field: [1.0e4, -2.0e4, 3.0e4],
            ..MaterialParams::default()
        };
        let model = WireModel::new(g.clone(), params.clone(), grains).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut f = SpinField::uniform(g.nx(), g.ny(), Vec3::Z);
        for v in &mut f.m {
            *v = Vec3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() + 0.2,
            )
            .normalized();
        }
        let dm: Vec<Vec3> = (0..f.m.len())
            .map(|_| {
                Vec3::new(
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                )
            })
            .collect();
        let h = effective_field(&f, &model).unwrap();
        let dx = g.cell_size * 1e-9;
        let volume = dx * dx * g.thickness * 1e-9;
        let analytic: f64 = -MU0 * params.saturation_ms * volume
            * h.iter().zip(&dm).map(|(a, b)| a.dot(*b)).sum::<f64>();
        let eps = 1e-5;
        let shifted = |s: f64| -> Vec<Vec3> { f.m.iter().zip(&dm).map(|(&a, &b)| a + b * s).collect() };
        let numeric = (model.energy_of(&shifted(eps)) - model.energy_of(&shifted(-eps))) / (2.0 * eps);
        let rel = (numeric - analytic).abs() / analytic.abs();
        assert!(rel < 1e-6, "relative error {rel}");
    }

    #[test]
    fn dump_has_one_line_per_cell() {
        let g = small_geometry();
        let f = SpinField::uniform(g.nx(), g.ny(), Vec3::Z);
        let mut buf = Vec::new();
        f.write_table(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + g.cell_count());
    }
}
