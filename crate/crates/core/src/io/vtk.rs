//! Legacy ASCII VTK structured grids.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum VtkField {
    Scalar(Vec<f64>),
    Vector(Vec<[f64; 3]>),
}

impl VtkField {
    fn len(&self) -> usize {
        match self {
            VtkField::Scalar(v) => v.len(),
            VtkField::Vector(v) => v.len(),
        }
    }
}

/// Points are stored in VTK order (first axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct VtkGrid {
    pub title: String,
    pub dims: [usize; 3],
    pub points: Vec<[f64; 3]>,
    pub point_data: Vec<(String, VtkField)>,
    pub cell_data: Vec<(String, VtkField)>,
}

impl VtkGrid {
    pub fn new(title: &str, dims: [usize; 3], points: Vec<[f64; 3]>) -> Self {
        assert_eq!(points.len(), dims.iter().product::<usize>());
        Self {
            title: title.to_string(),
            dims,
            points,
            point_data: Vec::new(),
            cell_data: Vec::new(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.dims.iter().map(|&d| d.saturating_sub(1).max(1)).product()
    }

    pub fn point_field(mut self, name: &str, f: VtkField) -> Self {
        assert_eq!(f.len(), self.points.len());
        self.point_data.push((name.to_string(), f));
        self
    }

    pub fn cell_field(mut self, name: &str, f: VtkField) -> Self {
        assert_eq!(f.len(), self.n_cells());
        self.cell_data.push((name.to_string(), f));
        self
    }
}

fn write_fields(f: &mut fmt::Formatter<'_>, fields: &[(String, VtkField)]) -> fmt::Result {
    for (name, field) in fields {
        match field {
            VtkField::Scalar(v) => {
                writeln!(f, "SCALARS {name} double 1")?;
                writeln!(f, "LOOKUP_TABLE default")?;
                for x in v {
                    writeln!(f, "{x:.16e}")?;
                }
            }
            VtkField::Vector(v) => {
                writeln!(f, "VECTORS {name} double")?;
                for x in v {
                    writeln!(f, "{:.16e} {:.16e} {:.16e}", x[0], x[1], x[2])?;
                }
            }
        }
    }
    Ok(())
}

impl fmt::Display for VtkGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# vtk DataFile Version 3.0")?;
        writeln!(f, "{}", self.title.replace('\n', " "))?;
        writeln!(f, "ASCII")?;
        writeln!(f, "DATASET STRUCTURED_GRID")?;
        writeln!(f, "DIMENSIONS {} {} {}", self.dims[0], self.dims[1], self.dims[2])?;
        writeln!(f, "POINTS {} double", self.points.len())?;
        for p in &self.points {
            writeln!(f, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2])?;
        }
        if !self.cell_data.is_empty() {
            writeln!(f, "CELL_DATA {}", self.n_cells())?;
            write_fields(f, &self.cell_data)?;
        }
        if !self.point_data.is_empty() {
            writeln!(f, "POINT_DATA {}", self.points.len())?;
            write_fields(f, &self.point_data)?;
        }
        Ok(())
    }
}
