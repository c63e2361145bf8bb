//! Writes the bundled scenario files.
//!
//! cargo run -p crowdsim-core --example generate -- [out_dir]

use std::path::PathBuf;

use crowdsim_core::presets;
use crowdsim_core::scenario::serialize_scenario;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    std::fs::create_dir_all(&dir)?;
    let specs = [
        ("trade_show_200.json", presets::trade_show(200, 1)),
        ("trade_show_1000.json", presets::trade_show(1000, 1)),
        ("open_crossing_50.json", presets::open_crossing(50, 0)),
        ("robot_room.json", presets::robot_room(10.0)),
        ("robot_crowd_room.json", presets::robot_and_crowd_room(10, 7)),
    ];
    for (file, spec) in specs {
        let path = dir.join(file);
        std::fs::write(&path, serialize_scenario(&spec))?;
        println!("{} ({} agents)", path.display(), spec.agents.len());
    }
    Ok(())
}
