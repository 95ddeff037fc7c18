use megsim_py::megsim_module;
use pyo3::prelude::*;
use pyo3::types::PyModule;

fn with_module(code: &std::ffi::CStr) {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "megsim").unwrap();
        megsim_module(&m).unwrap();
        let globals = pyo3::types::PyDict::new(py);
        globals.set_item("megsim", m).unwrap();
        py.run(code, Some(&globals), None).unwrap();
    });
}

#[test]
fn case_study_latencies_through_python() {
    with_module(
        c"
r = megsim.Scenario.case_study().run()
assert [round(x.t_tx_s, 2) for x in r] == [50.33, 1.05, 0.58]
assert [round(x.t_e2e_s, 2) for x in r] == [57.91, 8.63, 8.16]
assert megsim.records_to_csv(r).splitlines()[1] == r[0].csv_row()
",
    );
}

#[test]
fn errors_map_to_python_exceptions() {
    with_module(
        c"
try:
    megsim.Scenario.from_toml(megsim.case_study_toml(), ['repetitions=0'])
    raise AssertionError('accepted')
except megsim.ConfigError as e:
    assert isinstance(e, ValueError)
    assert 'scenario.repetitions' in str(e)
try:
    megsim.ber_bpsk(float('nan'))
    raise AssertionError('accepted')
except megsim.SimulationError:
    pass
",
    );
}

#[test]
fn seed_setter_changes_distortion() {
    with_module(
        c"
s = megsim.Scenario.from_toml(megsim.case_study_toml(), ['schemes=[\"MEG\"]', 'snr_db=0'])
a = s.run()[0].mse
s.seed = s.seed + 1
b = s.run()[0].mse
assert a != b and s.seed == 2025
",
    );
}
