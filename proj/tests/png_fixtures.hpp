#pragma once

// small png byte streams produced by an independent encoder,
// with the expected raw pixel bytes alongside

inline const unsigned char kFixRgbPng[] = {137,80,78,71,13,10,26,10,0,0,0,13,73,72,68,82,0,0,0,9,0,0,0,7,8,2,0,0,0,85,249,240,55,0,0,0,165,73,68,65,84,120,156,5,193,33,79,66,97,24,64,225,227,206,55,27,17,139,175,163,240,145,216,28,149,141,13,163,127,192,128,229,82,52,10,193,25,45,142,128,1,139,129,104,162,97,185,27,163,147,169,70,216,40,106,48,104,113,206,192,243,28,192,97,248,25,158,135,79,225,125,184,14,91,225,119,216,73,228,51,188,196,55,188,192,6,22,120,131,95,248,156,200,239,88,193,63,124,197,45,46,240,1,187,88,36,242,35,174,240,20,95,240,10,7,248,143,63,216,75,228,49,214,113,135,183,216,198,19,44,113,130,101,34,79,113,131,51,252,192,62,142,176,134,67,108,36,242,18,171,120,141,77,252,197,59,60,198,35,156,239,1,166,77,34,118,82,199,174,163,0,0,0,0,73,69,78,68,174,66,96,130};
inline const unsigned n_kFixRgbPng = sizeof(kFixRgbPng);
inline const unsigned char kFixRgbRaw[] = {0,0,6,28,3,240,56,6,57,84,9,201,112,12,72,140,15,22,168,18,71,196,21,57,224,24,118,0,37,71,28,40,75,56,43,16,84,46,31,112,49,69,140,52,118,168,55,229,196,58,211,224,61,104,0,74,47,28,77,60,56,80,10,84,83,206,112,86,174,140,89,101,168,92,105,196,95,169,224,98,200,0,111,186,28,114,126,56,117,107,84,120,111,112,123,213,140,126,30,168,129,26,196,132,92,224,135,182,0,148,68,28,151,104,56,154,75,84,157,192,112,160,15,140,163,44,168,166,224,196,169,111,224,172,106,0,185,221,28,188,188,56,191,99,84,194,169,112,197,112,140,200,246,168,203,21,196,206,134,224,209,172,0,222,150,28,225,171,56,228,202,84,231,246,112,234,161,140,237,109,168,240,48,196,243,156,224,246,90};
inline const unsigned n_kFixRgbRaw = sizeof(kFixRgbRaw);
inline const int kFixRgbW = 9, kFixRgbH = 7;
inline const unsigned char kFixGrayPng[] = {137,80,78,71,13,10,26,10,0,0,0,13,73,72,68,82,0,0,0,5,0,0,0,4,8,0,0,0,0,99,88,170,156,0,0,0,21,73,68,65,84,120,156,99,100,176,181,181,181,101,18,20,20,20,20,68,38,1,28,249,1,251,8,202,230,100,0,0,0,0,73,69,78,68,174,66,96,130};
inline const unsigned n_kFixGrayPng = sizeof(kFixGrayPng);
inline const unsigned char kFixGrayRaw[] = {0,61,122,183,244,17,78,139,200,5,34,95,156,217,22,51,112,173,234,39};
inline const unsigned n_kFixGrayRaw = sizeof(kFixGrayRaw);
inline const int kFixGrayW = 5, kFixGrayH = 4;
inline const unsigned char kFixRgbaPng[] = {137,80,78,71,13,10,26,10,0,0,0,13,73,72,68,82,0,0,0,6,0,0,0,3,8,6,0,0,0,176,1,126,251,0,0,0,33,73,68,65,84,120,156,99,100,96,96,96,208,96,96,48,66,199,44,12,1,12,140,12,12,188,24,24,73,66,10,5,3,0,144,39,3,46,86,95,21,103,0,0,0,0,73,69,78,68,174,66,96,130};
inline const unsigned n_kFixRgbaPng = sizeof(kFixRgbaPng);
inline const unsigned char kFixRgbaRaw[] = {0,0,0,40,0,0,80,0,0,120,0,0,160,0,0,200,0,0,0,80,0,40,80,13,80,80,26,120,80,39,160,80,52,200,80,65,0,160,0,40,160,26,80,160,52,120,160,78,160,160,104,200,160,130};
inline const unsigned n_kFixRgbaRaw = sizeof(kFixRgbaRaw);
inline const int kFixRgbaW = 6, kFixRgbaH = 3;
inline const unsigned char kFixPng16[] = {137,80,78,71,13,10,26,10,0,0,0,13,73,72,68,82,0,0,0,3,0,0,0,2,16,0,0,0,0,232,143,229,133,0,0,0,22,73,68,65,84,120,156,99,100,96,96,126,206,242,156,137,129,145,129,145,129,17,0,16,182,1,220,54,172,10,137,0,0,0,0,73,69,78,68,174,66,96,130};
inline const unsigned n_kFixPng16 = sizeof(kFixPng16);
