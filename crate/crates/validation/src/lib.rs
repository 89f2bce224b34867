//! Hosts the `acceptance` test target. It sits in its own package so that
//! an expected numerical shortfall there never stops cargo from running the
//! unit and property suites of the library crates.
