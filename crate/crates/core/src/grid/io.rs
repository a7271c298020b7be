//! Grid files.
//!
//! Binary layout (little endian):
//!
//! ```text
//! magic   b"RMXGRID1"
//! u32     n, m, K, L, field count
//! f64     field 1 values, row-major
//! ...
//! ```
//!
//! Fields are `f_1..f_m` followed by `w_1..w_m`; a field count of `m` means
//! the weights are omitted and default to one. The CSV form carries the same
//! header in its first line (`#grid,n=..,m=..,K=..,L=..,fields=..`), a column
//! header, and one row per cell. Both forms round-trip values bit-exactly.

use std::io::{BufRead, BufReader, Read, Write};

use super::{CellGrid, Field, SampledFunctions};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"RMXGRID1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridHeader {
    pub n: u32,
    pub m: u32,
    pub domain_exp: u32,
    pub level: u32,
    pub fields: u32,
}

impl GridHeader {
    fn of(fs: &SampledFunctions) -> Self {
        let g = fs.grid();
        GridHeader {
            n: g.dim() as u32,
            m: fs.m() as u32,
            domain_exp: g.domain_exp(),
            level: g.level(),
            fields: 2 * fs.m() as u32,
        }
    }

    fn grid(&self) -> Result<CellGrid> {
        if self.m == 0 {
            return Err(Error::Format("m must be positive".into()));
        }
        if self.fields != self.m && self.fields != 2 * self.m {
            return Err(Error::Format(format!(
                "field count {} must be m = {} or 2m",
                self.fields, self.m
            )));
        }
        CellGrid::new(self.n as usize, self.domain_exp, self.level)
    }
}

fn assemble(header: GridHeader, columns: Vec<Vec<f64>>) -> Result<SampledFunctions> {
    let grid = header.grid()?;
    let m = header.m as usize;
    let mut fields = columns.into_iter().map(|v| Field::new(grid, v));
    let functions = fields.by_ref().take(m).collect::<Result<Vec<_>>>()?;
    let weights = if header.fields as usize == 2 * m {
        fields.collect::<Result<Vec<_>>>()?
    } else {
        vec![Field::constant(grid, 1.0); m]
    };
    SampledFunctions::new(functions, weights)
}

fn all_fields(fs: &SampledFunctions) -> impl Iterator<Item = &Field> {
    fs.functions().iter().chain(fs.weights())
}

pub fn write_binary<W: Write>(fs: &SampledFunctions, mut out: W) -> Result<()> {
    let h = GridHeader::of(fs);
    out.write_all(MAGIC)?;
    for v in [h.n, h.m, h.domain_exp, h.level, h.fields] {
        out.write_all(&v.to_le_bytes())?;
    }
    for field in all_fields(fs) {
        for v in field.values() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<SampledFunctions> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a grid file (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    let mut header = [0u32; 5];
    for slot in header.iter_mut() {
        input.read_exact(&mut word)?;
        *slot = u32::from_le_bytes(word);
    }
    let header = GridHeader {
        n: header[0],
        m: header[1],
        domain_exp: header[2],
        level: header[3],
        fields: header[4],
    };
    let cells = header.grid()?.cell_count();
    let mut buf = [0u8; 8];
    let mut columns = Vec::with_capacity(header.fields as usize);
    for _ in 0..header.fields {
        let mut col = Vec::with_capacity(cells);
        for _ in 0..cells {
            input.read_exact(&mut buf)?;
            col.push(f64::from_le_bytes(buf));
        }
        columns.push(col);
    }
    if input.read(&mut buf)? != 0 {
        return Err(Error::Format("trailing bytes after last field".into()));
    }
    assemble(header, columns)
}

pub fn write_csv<W: Write>(fs: &SampledFunctions, mut out: W) -> Result<()> {
    let h = GridHeader::of(fs);
    writeln!(
        out,
        "#grid,n={},m={},K={},L={},fields={}",
        h.n, h.m, h.domain_exp, h.level, h.fields
    )?;
    let mut wtr = csv::Writer::from_writer(out);
    let mut names = vec!["cell".to_string()];
    names.extend((1..=fs.m()).map(|i| format!("f{i}")));
    names.extend((1..=fs.m()).map(|i| format!("w{i}")));
    wtr.write_record(&names)?;
    let fields: Vec<&Field> = all_fields(fs).collect();
    for cell in 0..fs.grid().cell_count() {
        let mut row = vec![cell.to_string()];
        row.extend(fields.iter().map(|f| f.values()[cell].to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

fn parse_header_line(line: &str) -> Result<GridHeader> {
    let line = line.trim();
    let rest = line
        .strip_prefix("#grid,")
        .ok_or_else(|| Error::Format(format!("expected '#grid,' header, got {line:?}")))?;
    let get = |key: &str| -> Result<u32> {
        rest.split(',')
            .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
            .ok_or_else(|| Error::Format(format!("header is missing {key}")))?
            .parse::<u32>()
            .map_err(|e| Error::Format(format!("bad {key}: {e}")))
    };
    Ok(GridHeader {
        n: get("n")?,
        m: get("m")?,
        domain_exp: get("K")?,
        level: get("L")?,
        fields: get("fields")?,
    })
}

pub fn read_csv<R: Read>(input: R) -> Result<SampledFunctions> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let header = parse_header_line(&first)?;
    let cells = header.grid()?.cell_count();
    let nf = header.fields as usize;
    let mut columns = vec![Vec::with_capacity(cells); nf];
    let mut rdr = csv::Reader::from_reader(reader);
    let mut seen = 0usize;
    for record in rdr.records() {
        let record = record?;
        if record.len() != nf + 1 {
            return Err(Error::Format(format!(
                "row {seen} has {} columns, expected {}",
                record.len(),
                nf + 1
            )));
        }
        let cell: usize = record[0]
            .parse()
            .map_err(|e| Error::Format(format!("bad cell index on row {seen}: {e}")))?;
        if cell != seen {
            return Err(Error::Format(format!("row {seen} carries cell index {cell}")));
        }
        for (col, text) in columns.iter_mut().zip(record.iter().skip(1)) {
            col.push(
                text.parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad value on row {seen}: {e}")))?,
            );
        }
        seen += 1;
    }
    if seen != cells {
        return Err(Error::Format(format!("expected {cells} rows, found {seen}")));
    }
    assemble(header, columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SampledFunctions {
        let g = CellGrid::new(2, 0, 1).unwrap();
        let f1 = Field::from_fn(g, |c| (c[0] * 7 + c[1]) as f64 / 3.0).unwrap();
        let f2 = Field::from_fn(g, |c| 1e-300 * (c[1] + 1) as f64).unwrap();
        let w1 = Field::from_fn(g, |c| 0.1 + c[0] as f64).unwrap();
        let w2 = Field::constant(g, std::f64::consts::PI);
        SampledFunctions::new(vec![f1, f2], vec![w1, w2]).unwrap()
    }

    fn same(a: &SampledFunctions, b: &SampledFunctions) {
        assert_eq!(a.grid(), b.grid());
        for (x, y) in a.functions().iter().chain(a.weights()).zip(b.functions().iter().chain(b.weights())) {
            let xb: Vec<u64> = x.values().iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
    }

    #[test]
    fn binary_and_csv_round_trip_bit_exact() {
        let fs = sample();
        let mut bin = Vec::new();
        write_binary(&fs, &mut bin).unwrap();
        same(&fs, &read_binary(&bin[..]).unwrap());
        let mut text = Vec::new();
        write_csv(&fs, &mut text).unwrap();
        same(&fs, &read_csv(&text[..]).unwrap());
    }

    #[test]
    fn functions_only_file_gets_unit_weights() {
        let text = "#grid,n=1,m=1,K=0,L=0,fields=1\ncell,f1\n0,1\n1,2\n2,0.5\n";
        let fs = read_csv(text.as_bytes()).unwrap();
        assert_eq!(fs.weights()[0].values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(read_binary(&b"NOTAGRID"[..]).is_err());
        let short = "#grid,n=1,m=1,K=0,L=0,fields=1\ncell,f1\n0,1\n";
        assert!(read_csv(short.as_bytes()).is_err());
        let bad_count = "#grid,n=1,m=2,K=0,L=0,fields=3\ncell,a,b,c\n";
        assert!(read_csv(bad_count.as_bytes()).is_err());
        let mut bin = Vec::new();
        write_binary(&sample(), &mut bin).unwrap();
        bin.push(0);
        assert!(read_binary(&bin[..]).is_err());
    }
}
