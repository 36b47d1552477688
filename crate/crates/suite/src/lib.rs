//! Hosts the `acceptance` test target, which runs after the library and CLI
//! test suites.
