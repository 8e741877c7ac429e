/// Gnuplot script drawing `(label, y, stderr)` columns (1-based) of `csv`
/// against column `x`, with error bars. Schema comment lines are skipped by
/// gnuplot; the header row supplies the column names.
pub fn gnuplot_script(csv: &str, title: &str, x: usize, xlabel: &str, ylabel: &str, series: &[(&str, usize, usize)]) -> String {
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset title '{title}'\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset terminal pngcairo size 800,560\nset output '{}.png'\n",
        csv.trim_end_matches(".csv")
    );
    let plots: Vec<String> = series
        .iter()
        .map(|(label, y, se)| format!("'{csv}' using {x}:{y}:{se} with yerrorlines title '{label}'"))
        .collect();
    s.push_str("plot ");
    s.push_str(&plots.join(", \\\n     "));
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_references_columns() {
        let s = gnuplot_script("fig4.csv", "t", 1, "c", "risk", &[("a", 4, 5), ("b", 6, 7)]);
        assert!(s.contains("'fig4.csv' using 1:4:5"));
        assert!(s.contains("using 1:6:7 with yerrorlines title 'b'"));
        assert!(s.contains("set output 'fig4.png'"));
    }
}
