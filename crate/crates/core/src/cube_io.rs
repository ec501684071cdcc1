//! Binary radar-cube stream format.
//!
//! All fields little-endian. Each cube record is:
//!
//! | field          | type       | notes                                   |
//! |----------------|------------|-----------------------------------------|
//! | magic          | 4 bytes    | `TBDC`                                  |
//! | version        | u32        | 1                                       |
//! | n_range        | u32        |                                         |
//! | n_velocity     | u32        |                                         |
//! | n_azimuth      | u32        |                                         |
//! | range_res      | f64        | m per cell                              |
//! | velocity_res   | f64        | m/s per cell                            |
//! | azimuth_res    | f64        | rad per cell                            |
//! | range_offset   | f64        | m                                       |
//! | velocity_offset| f64        | m/s                                     |
//! | azimuth_offset | f64        | rad                                     |
//! | timestamp      | f64        | s                                       |
//! | intensities    | f64 × N    | N = n_range·n_velocity·n_azimuth, range-|
//! |                |            | major, then velocity, then azimuth      |
//!
//! A cube file is any number of records back to back.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, TrackingError};
use crate::measurement::{CellGrid, RadarCube};

pub const MAGIC: &[u8; 4] = b"TBDC";
pub const VERSION: u32 = 1;

pub fn write_cube<W: Write>(w: &mut W, cube: &RadarCube) -> Result<()> {
    cube.validate()?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for n in [cube.grid.n_range, cube.grid.n_velocity, cube.grid.n_azimuth] {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for v in [
        cube.grid.range_res,
        cube.grid.velocity_res,
        cube.grid.azimuth_res,
        cube.grid.range_offset,
        cube.grid.velocity_offset,
        cube.grid.azimuth_offset,
        cube.timestamp,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for z in &cube.intensities {
        w.write_all(&z.to_le_bytes())?;
    }
    Ok(())
}

/// Read one cube record. Returns `None` at a clean end of stream.
pub fn read_cube<R: Read>(r: &mut R) -> Result<Option<RadarCube>> {
    let mut magic = [0u8; 4];
    match r.read_exact(&mut magic) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    if &magic != MAGIC {
        return Err(TrackingError::CubeFormat(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(TrackingError::CubeFormat(format!(
            "unsupported version {version}"
        )));
    }
    let n_range = read_u32(r)? as usize;
    let n_velocity = read_u32(r)? as usize;
    let n_azimuth = read_u32(r)? as usize;
    let mut vals = [0.0f64; 7];
    for v in &mut vals {
        *v = read_f64(r)?;
    }
    let grid = CellGrid {
        n_range,
        n_velocity,
        n_azimuth,
        range_res: vals[0],
        velocity_res: vals[1],
        azimuth_res: vals[2],
        range_offset: vals[3],
        velocity_offset: vals[4],
        azimuth_offset: vals[5],
    };
    grid.validate()
        .map_err(|e| TrackingError::CubeFormat(format!("invalid grid in header: {e}")))?;
    let count = grid.cell_count();
    let mut payload = vec![0u8; count * 8];
    r.read_exact(&mut payload).map_err(|e| {
        TrackingError::CubeFormat(format!("truncated payload ({count} cells expected): {e}"))
    })?;
    let intensities: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let cube = RadarCube {
        grid,
        intensities,
        timestamp: vals[6],
    };
    cube.validate()?;
    Ok(Some(cube))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn write_stream(path: &Path, cubes: &[RadarCube]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for cube in cubes {
        write_cube(&mut w, cube)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stream(path: &Path) -> Result<Vec<RadarCube>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut cubes = Vec::new();
    while let Some(cube) = read_cube(&mut r)? {
        cubes.push(cube);
    }
    Ok(cubes)
}
