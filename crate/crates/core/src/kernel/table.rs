//! Published coefficients of the C³ regularized delta function.
//!
//! `TILDE_DELTA[p][c]` is the coefficient of `r^p` on the interval
//! `[c, c + 1)`, for `r >= 0`. The function vanishes for `r >= 8`.

pub const TILDE_DELTA: [[&str; 8]; 16] = [
    [
        "12949745023/20432412000",
        "3177441629/5003856000",
        "21914742667/35026992000",
        "4094824493/17513496000",
        "-1606651889/5837832000",
        "163201885541/35026992000",
        "1005507698627/245188944000",
        "-5005877248/1915538625",
    ],
    [
        "0",
        "-171811/22861440",
        "-2566373/38102400",
        "3468455/4191264",
        "301286857/62868960",
        "-4590637187/1089728640",
        "-14398288259/1089728640",
        "421762048/127702575",
    ],
    [
        "-16459/30240",
        "-9089/17280",
        "-14339/51840",
        "-163307/285120",
        "-703993/95040",
        "-2987689/673920",
        "56979607/3991680",
        "-23168/45045",
    ],
    [
        "0",
        "-64649/3265920",
        "-1946191/5443200",
        "-3764137/2993760",
        "32748677/8981280",
        "101232611/11975040",
        "-17097977/2395008",
        "-2091088/1403325",
    ],
    [
        "81491/453600",
        "141751/777600",
        "288599/777600",
        "6701891/4276800",
        "560257/1425600",
        "-4187303/777600",
        "78901349/59875200",
        "642734/467775",
    ],
    [
        "0",
        "88517/5443200",
        "61633/3024000",
        "-93301/151200",
        "-1620853/1360800",
        "1038857/604800",
        "255833/604800",
        "-538927/850500",
    ],
    [
        "-11737/340200",
        "-119603/2332800",
        "-269467/2332800",
        "16957/1166400",
        "218939/388800",
        "-488741/2332800",
        "-5818427/16329600",
        "773411/4082400",
    ],
    [
        "143/145152",
        "298727/45722880",
        "630773/15240960",
        "1057927/15240960",
        "-1137851/9144576",
        "-152395/3048192",
        "1823393/15240960",
        "-1825543/45722880",
    ],
    [
        "3223/793800",
        "28127/5443200",
        "-7337/5443200",
        "-9859/388800",
        "7069/907200",
        "157289/5443200",
        "-966457/38102400",
        "58621/9525600",
    ],
    [
        "-143/435456",
        "-30173/19595520",
        "-79651/32659200",
        "4771/1306368",
        "61009/19595520",
        "-44227/6531840",
        "24421/6531840",
        "-69019/97977600",
    ],
    [
        "-3211/13608000",
        "-403/11664000",
        "7033/11664000",
        "91/2916000",
        "-247/243000",
        "11519/11664000",
        "-32227/81648000",
        "2447/40824000",
    ],
    [
        "13/483840",
        "13/207360",
        "-13/345600",
        "-221/2280960",
        "13/84480",
        "-221/2280960",
        "53/1774080",
        "-299/79833600",
    ],
    [
        "1/181440",
        "-1/155520",
        "-1/155520",
        "7/427680",
        "-1/71280",
        "1/155520",
        "-19/11975040",
        "1/5987520",
    ],
    [
        "-1/1451520",
        "-1/2612736",
        "29/21772800",
        "-13/9580032",
        "113/143700480",
        "-173/622702080",
        "1/17791488",
        "-47/9340531200",
    ],
    [
        "-1/25401600",
        "1/10886400",
        "-1/10886400",
        "1/17107200",
        "-1/39916800",
        "1/141523200",
        "-1/838252800",
        "1/10897286400",
    ],
    [
        "1/203212800",
        "-1/261273600",
        "1/435456000",
        "-1/958003200",
        "1/2874009600",
        "-1/12454041600",
        "1/87178291200",
        "-1/1307674368000",
    ],
];
