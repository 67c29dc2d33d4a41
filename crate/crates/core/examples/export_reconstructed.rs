//! Writes the reconstructed NYC neighborhood survey as a records file and a
//! partition map, one record per respondent.
//!
//! cargo run -p vendorest --example export_reconstructed -- <out-dir>

use std::io::Write;
use std::path::PathBuf;

use vendorest::reference::reconstructed_survey;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&dir)?;
    let survey = reconstructed_survey()?;

    let mut map = std::fs::File::create(dir.join("partition_map.csv"))?;
    writeln!(map, "cell,subregion,borough")?;
    for r in &survey.rows {
        writeln!(map, "{},{},{}", r.subregion, r.subregion, r.borough)?;
    }

    let mut rec = std::fs::File::create(dir.join("records.csv"))?;
    writeln!(rec, "id,vendor_class,has_credential,veteran,cell")?;
    let mut id = 0;
    for (class, table) in [("food", &survey.food), ("merchandise", &survey.merchandise)] {
        for (i, (&n0, &n1)) in table.n0().iter().zip(table.n1()).enumerate() {
            let cell = survey.rows.get(i).map_or("", |r| r.subregion.as_str());
            for (count, cred) in [(n1, 1), (n0, 0)] {
                for _ in 0..count {
                    id += 1;
                    writeln!(rec, "r{id:04},{class},{cred},0,{cell}")?;
                }
            }
        }
    }
    eprintln!("wrote {id} records to {}", dir.display());
    Ok(())
}
