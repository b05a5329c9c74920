#include <pybind11/pybind11.h>
PYBIND11_MODULE(cfee_py, m) { m.doc() = "placeholder"; }
