//! CSV input/output with dtype inference.
//!
//! Inference runs per column over the non-empty cells: integers, then finite
//! floats, then `True`/`False`, falling back to text. Empty cells are
//! missing. An all-empty column is read as float, as pandas would.

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::error::{Result, TabularError};
use crate::table::{parse_bool, Column, ColumnData, Table};

pub fn read_csv(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(TabularError::FileNotFound(path.display().to_string()))
        }
        Err(e) => return Err(TabularError::Io(e.to_string())),
    };
    read_csv_from(file)
}

pub fn read_csv_from<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(e, 0))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(TabularError::Parse { row: 0, col: 0, detail: "No columns to parse from file".into() });
    }
    let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(e, row + 1))?;
        for (col, cell) in record.iter().enumerate() {
            raw[col].push(if cell.is_empty() { None } else { Some(cell.to_string()) });
        }
    }
    let columns = headers
        .into_iter()
        .zip(raw)
        .map(|(name, cells)| Column::new(name, infer_column(cells)))
        .collect();
    Table::new(columns)
}

fn csv_error(e: csv::Error, row: usize) -> TabularError {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => TabularError::Parse {
            row,
            col: (*len).min(*expected_len) as usize,
            detail: format!("Expected {expected_len} fields, saw {len}"),
        },
        _ => TabularError::Parse { row, col: 0, detail: e.to_string() },
    }
}

fn infer_column(cells: Vec<Option<String>>) -> ColumnData {
    let present = || cells.iter().flatten();
    if present().next().is_none() {
        return ColumnData::Float(vec![None; cells.len()]);
    }
    if present().all(|s| s.parse::<i64>().is_ok()) {
        return ColumnData::Int(cells.iter().map(|c| c.as_ref().map(|s| s.parse().unwrap())).collect());
    }
    if present().all(|s| s.parse::<f64>().map(f64::is_finite).unwrap_or(false)) {
        return ColumnData::Float(cells.iter().map(|c| c.as_ref().map(|s| s.parse().unwrap())).collect());
    }
    if present().all(|s| parse_bool(s).is_some()) {
        return ColumnData::Bool(cells.iter().map(|c| c.as_ref().and_then(|s| parse_bool(s))).collect());
    }
    ColumnData::Text(cells)
}

/// Write with a header row and RFC 4180 quoting; missing cells are empty and
/// booleans are written as `True`/`False`.
pub fn write_csv(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| TabularError::Io(format!("{}: {e}", parent.display())))?;
    }
    let file = fs::File::create(path).map_err(|e| TabularError::Io(format!("{}: {e}", path.display())))?;
    write_csv_to(table, file)
}

pub fn write_csv_to<W: std::io::Write>(table: &Table, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::Necessary).from_writer(writer);
    let io = |e: csv::Error| TabularError::Io(e.to_string());
    wtr.write_record(table.column_names()).map_err(io)?;
    let rendered: Vec<Vec<Option<String>>> = table.columns().iter().map(|c| c.data.to_strings()).collect();
    for row in 0..table.n_rows() {
        wtr.write_record(rendered.iter().map(|col| col[row].as_deref().unwrap_or("")))
            .map_err(io)?;
    }
    wtr.flush().map_err(|e| TabularError::Io(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::DType;

    #[test]
    fn infers_int_and_text() {
        let t = read_csv_from("a,b\n1,x\n2,y\n".as_bytes()).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.n_cols(), 2);
        assert_eq!(t.column("a").unwrap().dtype(), DType::Int);
        assert_eq!(t.column("b").unwrap().dtype(), DType::Text);
    }

    #[test]
    fn empty_cell_is_missing() {
        let t = read_csv_from("a,b\n1,\n2,3\n".as_bytes()).unwrap();
        let b = t.column("b").unwrap();
        assert!(b.data.is_missing(0));
        assert_eq!(b.dtype(), DType::Int);
    }

    #[test]
    fn bool_and_float_inference() {
        let t = read_csv_from("f,g\n1.5,True\n2,False\n,\n".as_bytes()).unwrap();
        assert_eq!(t.column("f").unwrap().dtype(), DType::Float);
        assert_eq!(t.column("g").unwrap().dtype(), DType::Bool);
        assert_eq!(t.missing_cells(), 2);
    }

    #[test]
    fn nonexistent_path_is_file_not_found() {
        let err = read_csv("/definitely/not/here.csv").unwrap_err();
        assert!(matches!(err, TabularError::FileNotFound(_)));
    }

    #[test]
    fn ragged_row_is_parse_error() {
        let err = read_csv_from("a,b\n1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TabularError::Parse { row: 2, .. }), "{err:?}");
    }

    #[test]
    fn bool_written_as_python_literals_and_quoted_text() {
        let t = Table::new(vec![
            Column::new("flag", ColumnData::Bool(vec![Some(true), Some(false)])),
            Column::new("s", ColumnData::Text(vec![Some("a,b".into()), None])),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_csv_to(&t, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "flag,s\nTrue,\"a,b\"\nFalse,\n");
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let t = Table::new(vec![Column::new("a", ColumnData::Int(vec![Some(1)]))]).unwrap();
        let err = write_csv(&t, "/proc/definitely/not/writable.csv").unwrap_err();
        assert!(matches!(err, TabularError::Io(_)));
    }
}
