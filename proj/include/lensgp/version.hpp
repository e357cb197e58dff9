#pragma once

#define LENSGP_VERSION "0.1.0"
