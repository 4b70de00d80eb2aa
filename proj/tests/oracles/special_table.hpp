#pragma once
// Generated by special_table.py; do not edit.
namespace oracle {
struct SpecialRow { double x, lgamma, digamma, trigamma; };
inline constexpr SpecialRow kSpecialTable[] = {
  {0.001, 6.907178885383853, -1000.5755719318103, 1000001.6425331958},
  {0.00137, 6.592155296340212, -730.5019716578613, 532795.0776313833},
  {0.0018769, 6.2770533179234045, -533.3675685004272, 283870.48586175893},
  {0.002571353, 5.961844265463823, -389.47331212535596, 151245.09629858108},
  {0.00352275361, 5.646489120225281, -284.44028126616263, 80583.15791002495},
  {0.0048261724457, 5.330934949402793, -207.7728416157355, 42934.939072792666},
  {0.006611856250609, 5.015110213134819, -151.80984936126913, 22876.21262326805},
  {0.00905824306333433, 4.6989187291845695, -110.9590976104574, 12189.051330294309},
  {0.012409792996768032, 4.382232136294043, -81.13850685472791, 6494.997183682745},
  {0.017001416405572203, 4.064880922385083, -59.368220437370454, 3461.236068819593},
  {0.023291940475633918, 3.7466446230502255, -43.4728463799526, 1844.8593835945132},
  {0.03190995845161847, 3.4272429408821923, -31.864095070012244, 983.6528784133329},
  {0.0437166430787173, 3.1063318028587, -23.382098623215388, 524.7922785755671},
  {0.05989180101784271, 2.783512635866087, -17.179565731715176, 280.29410104927075},
  {0.0820517673944445, 2.458370806545486, -12.637212278281858, 150.0008503121224},
  {0.11241092133038898, 2.1305723484634482, -9.302041096808823, 80.54815944929611},
  {0.1540029622226329, 1.8000696393473496, -6.8423352574065746, 43.50297347736832},
  {0.21098405824500707, 1.467499910374951, -5.01490199580502, 23.71604072504452},
  {0.2890481597956597, 1.134908390531889, -3.641316544090875, 13.11657160514735},
  {0.3959959789200538, 0.8069923228148992, -2.590776210000091, 7.406361549177593},
  {0.5, 0.5723649429247001, -1.9635100260214235, 4.934802200544679},
  {0.5425144911204737, 0.49314398945612187, -1.7677675527607764, 4.298436385435201},
  {0.7432448528350489, 0.21067437116823237, -1.1031536601393985, 2.5781559762073414},
  {1.0, 0.0, -0.5772156649015329, 1.6449340668482264},
  {1.018245448384017, -0.010260166446144477, -0.5475968047189915, 1.602126196148794},
  {1.3949962642861033, -0.11929290531687789, -0.06652757870084833, 1.0303288175227836},
  {1.5, -0.12078223763524522, 0.03648997397857652, 0.9348022005446793},
  {1.9111448820719614, -0.03497202485716291, 0.3638232018104645, 0.6829008514468291},
  {2.0, 0.0, 0.42278433509846713, 0.6449340668482264},
  {2.5, 0.2846828704729192, 0.7031566406452432, 0.49035775610023485},
  {2.6182684884385874, 0.37121020978222463, 0.7595578493908051, 0.46390616313510846},
  {3.0, 0.6931471805599453, 0.9227843350984671, 0.39493406684822646},
  {3.5870278291608644, 1.2982182473185113, 1.1315047632825308, 0.32119996780995635},
  {4.914228125950385, 3.0496905913284507, 1.4869526295293143, 0.2255880699565415},
  {5.75, 4.366716036622286, 1.6597303710679365, 0.18990741193925276},
  {6.0, 4.787491742782046, 1.7061176684318005, 0.18132295573711532},
  {6.732492532552027, 6.0838379308850365, 1.8308442372876101, 0.16010827286665816},
  {7.25, 7.0521854507385395, 1.910453526883736, 0.14787923315893217},
  {9.223514769596276, 11.085977932725227, 2.1665685033918263, 0.11450773648737675},
  {10.0, 12.801827480081469, 2.251752589066721, 0.10516633568168575},
  {12.6362152343469, 19.07363877781316, 2.4964765351716602, 0.08235150184860117},
  {17.31161487105525, 31.548399856692143, 2.8222173423662373, 0.05946516873164118},
  {23.716912373345693, 50.71465816387542, 3.1449582696926948, 0.04306539491724266},
  {32.4921699514836, 79.79404917276298, 3.4655318869095644, 0.03125510427360828},
  {44.51427283353254, 123.47634921487214, 3.78453547003812, 0.022718925639989836},
  {60.984553781939574, 188.56480489571175, 4.102399411878115, 0.016532770119111438},
  {83.54883868125721, 284.89803198567904, 4.419434893617877, 0.012040962090933905},
  {114.46190899332238, 426.66479583026813, 4.735867469137635, 0.008774805480969044},
  {156.81281532085166, 634.2761948557736, 5.051860931165414, 0.006397406299705439},
  {214.83355698956677, 937.0277299716793, 5.367534386065068, 0.004665616528063239},
  {294.32197307570647, 1376.8794720082292, 5.6829745328085535, 0.003403418145562357},
  {403.2211031137179, 2013.8172813346102, 5.99824452745039, 0.002483106741739207},
  {552.4129112657935, 2933.447552545803, 6.313390401171972, 0.0018118795665263004},
  {756.8056884341371, 4257.744341216453, 6.628445717076813, 0.00132221649209385},
  {999.9, 5904.5297026922835, 6.907155140626809, 0.0010006002767326454},
  {1000.0, 5905.220423209181, 6.907255195648812, 0.0010005001666666333},
};
}  // namespace oracle
