#include <iostream>

#include "mwnn/app.hpp"

int main(int argc, char** argv) { return mwnn::app::run(argc, argv, std::cout, std::cerr); }
