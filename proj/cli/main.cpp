#include "app.hpp"

int main(int argc, char** argv) {
    return plsinet::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
