// ============================================================================
// test_main.cpp — doctest entry point.  Suites are selected per ctest entry
// via --test-suite=<name>.
// ============================================================================
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
